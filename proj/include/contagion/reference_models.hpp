#pragma once

#include <string>
#include <vector>

#include "contagion/loss_engine.hpp"

namespace contagion {

// The four benchmark models: n = 10, T = 10, p = 0.1, q = 0.2, only fresh
// direct defaulters infect.
//   1: no mixing, one contact infects       2: no mixing, two contacts needed
//   3: sigma_X = sigma_Y = 0.2, one contact 4: sigma_X = sigma_Y = 0.2, two contacts
inline ModelSpec reference_model(int index, int n = 10, int periods = 10) {
  if (index < 1 || index > 4) throw DomainError("reference models are numbered 1..4");
  const Rational p(1, 10), q(1, 5), var(1, 25);
  const bool mixed = index >= 3;
  ModelSpec spec;
  spec.n = n;
  spec.periods = periods;
  spec.direct = mixed ? MixingLaw::from_variance(p, var) : MixingLaw::dirac(p);
  spec.infection = mixed ? MixingLaw::from_variance(q, var) : MixingLaw::dirac(q);
  spec.rule = InfectionRule::threshold(index % 2 == 1 ? 1 : 2, InfectorRule::fresh_only);
  return spec;
}

struct FigureRow {
  int model = 0;
  int t = 0;
  double mean = 0.0;
  double variance = 0.0;
  double p_ge_6 = 0.0;
  double p_eq_n = 0.0;
};

// E[N_t], V[N_t], P[N_t >= 6], P[N_t = n] for t = 1..T, computed exactly.
inline std::vector<FigureRow> figure_rows(int model, const ModelSpec& spec) {
  const auto surface = multi_period_pmf<Rational>(spec);
  surface.check();
  const auto stats = surface_stats(surface);
  std::vector<FigureRow> out;
  for (int t = 1; t <= spec.periods; ++t) {
    const auto& st = stats[t];
    FigureRow row;
    row.model = model;
    row.t = t;
    row.mean = to_double(st.mean);
    row.variance = to_double(st.variance);
    row.p_ge_6 = spec.n >= 6 ? to_double(st.survival[6]) : 0.0;
    row.p_eq_n = to_double(st.p_all);
    out.push_back(row);
  }
  return out;
}

inline std::vector<FigureRow> reference_figures() {
  std::vector<FigureRow> out;
  for (int m = 1; m <= 4; ++m)
    for (const auto& r : figure_rows(m, reference_model(m))) out.push_back(r);
  return out;
}

}  // namespace contagion
