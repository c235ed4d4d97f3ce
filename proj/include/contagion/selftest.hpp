#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "contagion/loss_engine.hpp"
#include "contagion/quadrature.hpp"
#include "contagion/reference_models.hpp"
#include "contagion/simulation.hpp"

namespace contagion {

struct SelftestOptions {
  std::int64_t mc_paths = 10000;
  std::uint64_t seed = 20240601;
  int threads = 0;
  int nodes = 64;
  // Negative control: feeds a perturbed lambda to the closed-form xi only.
  bool perturb_lambda = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline std::vector<CheckResult> run_selftest(const SelftestOptions& opt = {}) {
  std::vector<CheckResult> out;
  auto check = [&](const std::string& name, const std::function<std::string()>& body) {
    CheckResult r{name, true, {}};
    try {
      r.detail = body();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    out.push_back(std::move(r));
  };

  check("davis-lo-vs-recursion", [] {
    int cases = 0;
    for (int n = 1; n <= 10; ++n)
      for (const Rational& p : {Rational(1, 20), Rational(3, 10)})
        for (const Rational& q : {Rational(1, 10), Rational(7, 10)}) {
          ModelSpec s;
          s.n = n;
          s.direct = MixingLaw::dirac(p);
          s.infection = MixingLaw::dirac(q);
          if (multi_period_pmf<Rational>(s).rows[1] != davis_lo_pmf<Rational>(n, p, q))
            throw CrossCheckFailure("mismatch at n=" + std::to_string(n) + " p=" + p.get_str() +
                                    " q=" + q.get_str());
          ++cases;
        }
    return std::to_string(cases) + " cases equal exactly";
  });

  check("xi-closed-form-vs-eta-recursion", [&] {
    const int n = 8;
    const auto rule = InfectionRule::threshold(1);
    int cells = 0;
    for (const auto& law : {MixingLaw::dirac(Rational(1, 5)), MixingLaw::from_variance(Rational(1, 5), Rational(1, 25))}) {
      const auto lambda = infection_moments<Rational>(law, n);
      auto shifted = lambda;
      if (opt.perturb_lambda) shifted.values[1] += Rational(1, 1000);
      const auto eta_route = xi_table_general(rule, lambda, n);
      for (int k = 0; k <= n; ++k)
        for (int z = 0; z + k <= n; ++z, ++cells)
          if (xi_indicator_closed_form(shifted, k, z) != eta_route(k, z))
            throw CrossCheckFailure("xi_" + std::to_string(k) + "(" + std::to_string(z) + ") differs");
    }
    return std::to_string(cells) + " xi cells equal exactly";
  });

  check("subset-enumeration-vs-exchangeable", [] {
    for (int m = 1; m <= 4; ++m) {
      const auto spec = reference_model(m, 6, 3);
      const auto mu = moment_sequence<Rational>(spec.direct, 6);
      const auto xi = xi_table_general(spec.rule, infection_moments<Rational>(spec.infection, 6), 6);
      const auto law = HeterogeneousLaw<Rational>::exchangeable(6, mu);
      if (general_subset_pmf(law, xi, spec.rule, 3).rows != multi_period_pmf(6, 3, mu, xi, spec.rule).rows)
        throw CrossCheckFailure("model " + std::to_string(m) + " surfaces differ");
    }
    return std::string("models 1-4 at n=6, T=3 equal exactly");
  });

  check("quadrature-vs-rational", [&] {
    ModelSpec s;
    s.n = 20;
    s.periods = 10;
    s.direct = MixingLaw::from_variance(Rational(1, 10), Rational(1, 25));
    s.infection = MixingLaw::dirac(Rational(1, 5));
    const double err = validate_quadrature(s, QuadratureSettings{opt.nodes, MixingMode::redraw_per_period}, 1e-8);
    std::ostringstream o;
    o << "n=20 max error " << err;
    return o.str();
  });

  check("monte-carlo-vs-exact", [&] {
    std::ostringstream o;
    for (int m = 1; m <= 4; ++m) {
      SimConfig cfg;
      cfg.spec = reference_model(m);
      cfg.paths = opt.mc_paths;
      cfg.seed = opt.seed + static_cast<std::uint64_t>(m);
      cfg.threads = opt.threads;
      const auto exact = multi_period_pmf<Rational>(cfg.spec).to_double();
      // reduced path count: 5 SE plus one count of slack
      const auto cmp = compare_to_exact(exact, simulate(cfg), 5.0, 1.0 / static_cast<double>(cfg.paths));
      if (cmp.failures * 100 >= cmp.cells)
        throw CrossCheckFailure("model " + std::to_string(m) + ": " + std::to_string(cmp.failures) + " of " +
                                std::to_string(cmp.cells) + " cells outside band");
      o << "model " << m << " worst z " << cmp.worst_z << (m < 4 ? "; " : "");
    }
    return o.str();
  });
  return out;
}

}  // namespace contagion
