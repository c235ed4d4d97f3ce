// One line per acceptance criterion; exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace contagion;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o{false, {}};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) {
    o.pass = false;
    o.detail += " [over time limit " + std::to_string(static_cast<int>(limit_s)) + " s]";
  }
  if (!o.pass) ++failures;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", secs);
  std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail << " ("
            << buf << ")" << std::endl;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << v;
  return o.str();
}

QuoteSet bundled(const std::string& date) {
  return load_quotes(std::string(CONTAGION_DATA_DIR) + "/itraxx_" + date + ".csv");
}

}  // namespace

int main() {
  criterion(1, "Davis-Lo equivalence, n=1..15", 10, [] {
    const std::vector<Rational> grid{Rational(1, 20), Rational(1, 10), Rational(3, 10), Rational(7, 10)};
    int cases = 0;
    for (int n = 1; n <= 15; ++n)
      for (const auto& p : grid)
        for (const auto& q : grid) {
          ModelSpec s;
          s.n = n;
          s.direct = MixingLaw::dirac(p);
          s.infection = MixingLaw::dirac(q);
          if (multi_period_pmf<Rational>(s).rows[1] != davis_lo_pmf<Rational>(n, p, q))
            return Outcome{false, "mismatch at n=" + std::to_string(n) + " p=" + p.get_str() + " q=" + q.get_str()};
          ++cases;
        }
    return Outcome{true, std::to_string(cases) + " cases exactly equal"};
  });

  criterion(2, "xi closed form vs eta recursion, n<=12", 30, [] {
    const auto rule = InfectionRule::threshold(1);
    int tables = 0;
    for (int n = 1; n <= 12; ++n)
      for (const auto& law : {MixingLaw::dirac(Rational(1, 5)), MixingLaw::from_variance(Rational(1, 5), Rational(1, 25))}) {
        const auto lambda = infection_moments<Rational>(law, n);
        const auto a = xi_table_indicator(lambda, n);
        const auto b = xi_table_general(rule, lambda, n);
        if (!(a == b)) return Outcome{false, "xi tables differ at n=" + std::to_string(n)};
        const auto mu = moment_sequence<Rational>(MixingLaw::from_variance(Rational(1, 10), Rational(1, 25)), n);
        if (multi_period_pmf(n, 5, mu, a, rule).rows != multi_period_pmf(n, 5, mu, b, rule).rows)
          return Outcome{false, "surfaces differ at n=" + std::to_string(n)};
        ++tables;
      }
    return Outcome{true, std::to_string(tables) + " table pairs and surfaces identical"};
  });

  criterion(3, "subset enumeration vs exchangeable recursion, n=6, T<=3", 60, [] {
    for (int m = 1; m <= 4; ++m)
      for (int T = 1; T <= 3; ++T) {
        const auto spec = reference_model(m, 6, T);
        const auto mu = moment_sequence<Rational>(spec.direct, 6);
        const auto xi = xi_table_general(spec.rule, infection_moments<Rational>(spec.infection, 6), 6);
        const auto law = HeterogeneousLaw<Rational>::exchangeable(6, mu);
        if (general_subset_pmf(law, xi, spec.rule, T).rows != multi_period_pmf(6, T, mu, xi, spec.rule).rows)
          return Outcome{false, "model " + std::to_string(m) + " T=" + std::to_string(T) + " differs"};
      }
    return Outcome{true, "4 models x T=1..3 exactly equal"};
  });

  criterion(4, "Monte Carlo within 4 SE, 10^6 paths, models 1-4", 300, [] {
    int cells = 0, bad = 0;
    double worst = 0.0;
    for (int m = 1; m <= 4; ++m) {
      SimConfig cfg;
      cfg.spec = reference_model(m);
      cfg.paths = 1000000;
      cfg.seed = 20240601 + static_cast<std::uint64_t>(m);
      const auto exact = multi_period_pmf<Rational>(cfg.spec).to_double();
      const auto cmp = compare_to_exact(exact, simulate(cfg), 4.0);
      cells += cmp.cells;
      bad += cmp.failures;
      worst = std::max(worst, cmp.worst_z);
    }
    const bool ok = bad * 100 < cells;
    return Outcome{ok, std::to_string(bad) + "/" + std::to_string(cells) + " cells outside 4 SE, worst z " + fmt(worst)};
  });

  criterion(5, "figure ordinal properties", 0, [] {
    std::vector<std::vector<FigureRow>> f;
    for (int m = 1; m <= 4; ++m) f.push_back(figure_rows(m, reference_model(m)));
    std::string why;
    for (int m = 0; m < 4; ++m)
      for (int t = 1; t < 10; ++t)
        if (!(f[m][t].mean > f[m][t - 1].mean)) why += " mean of model " + std::to_string(m + 1) + " not increasing;";
    for (int m : {0, 2}) {
      int peak = 0;
      for (int t = 1; t < 10; ++t)
        if (f[m][t].variance > f[m][peak].variance) peak = t;
      bool hump = peak > 0 && peak < 9;
      for (int t = 1; t <= peak; ++t) hump = hump && f[m][t].variance > f[m][t - 1].variance;
      for (int t = peak + 1; t < 10; ++t) hump = hump && f[m][t].variance < f[m][t - 1].variance;
      if (!hump) why += " variance of model " + std::to_string(m + 1) + " not hump-shaped;";
    }
    for (int t = 0; t < 10; ++t) {
      if (!(f[2][t].variance > f[0][t].variance)) why += " V3<=V1 at t=" + std::to_string(t + 1) + ";";
      if (!(f[3][t].variance > f[1][t].variance)) why += " V4<=V2 at t=" + std::to_string(t + 1) + ";";
    }
    if (!(f[2][9].p_eq_n > f[0][9].p_eq_n && f[3][9].p_eq_n > f[1][9].p_eq_n))
      why += " P[N_10=10] not larger under mixing;";
    if (!why.empty()) return Outcome{false, why};
    return Outcome{true, "P[N_10=10]: " + fmt(f[0][9].p_eq_n) + ", " + fmt(f[1][9].p_eq_n) + " (i.i.d.) vs " +
                             fmt(f[2][9].p_eq_n) + ", " + fmt(f[3][9].p_eq_n) + " (mixed)"};
  });

  criterion(6, "quadrature vs exact, n=20, Q=64", 30, [] {
    ModelSpec s;
    s.n = 20;
    s.periods = 10;
    s.direct = MixingLaw::from_std_dev(0.1, 0.2);
    s.infection = MixingLaw::dirac(0.2);
    const double err = max_abs_difference(multi_period_pmf<Rational>(s).to_double(), mixed_quadrature_pmf(s, {}));
    return Outcome{err <= 1e-8, "max abs error " + fmt(err)};
  });

  criterion(7, "RMSE recomputed from printed tables", 0, [] {
    const auto q05 = bundled("2005-08-31"), q08 = bundled("2008-03-31");
    const double a = rmse(market_quotes(q05), std::vector<double>{20, 114, 7, 1, 1, 29}, variant_mask(1, q05));
    const double b = rmse(market_quotes(q08), std::vector<double>{0, 478, 309, 215, 109, 0}, variant_mask(3, q08));
    const bool ok = std::abs(a - 0.64) <= 0.01 && std::abs(b - 0.002) <= 0.001;
    return Outcome{ok, "2005 calibration 1: " + fmt(a) + ", 2008 calibration 3: " + fmt(b)};
  });

  criterion(8, "variant 4 (equity + index) fit, n=125", 600, [] {
    std::string detail;
    bool ok = true;
    for (const auto* date : {"2005-08-31", "2008-03-31"}) {
      const auto r = calibrate(4, bundled(date));
      ok = ok && r.rmse <= 1e-4;
      detail += std::string(date) + " rmse " + fmt(r.rmse) + (r.converged ? "" : " (not converged)") + "; ";
    }
    return Outcome{ok, detail};
  });

  criterion(9, "variant 3 on 2008 data, synthetic round trip", 0, [] {
    const auto q08 = bundled("2008-03-31");
    const auto r3 = calibrate(3, q08);
    auto synth = q08;
    const ModelParams truth{0.008, 0.04, 0.12};
    const auto s = model_quotes(truth, synth, {});
    for (std::size_t i = 0; i < s.size(); ++i) synth.instruments[i].quote = s[i];
    const auto r1 = calibrate(1, synth);
    const bool ok = r3.rmse <= 0.05 && r1.rmse <= 1e-6;
    return Outcome{ok, "variant 3 rmse " + fmt(r3.rmse) + " (p " + fmt(r3.alpha_star.p) + ", sigma_X " +
                           fmt(r3.alpha_star.sigma_x) + ", q " + fmt(r3.alpha_star.q) + "); round trip rmse " +
                           fmt(r1.rmse)};
  });

  criterion(10, "global invariants on random models", 60, [] {
    std::mt19937_64 rng(10);
    int surfaces = 0;
    for (int trial = 0; trial < 60; ++trial) {
      const auto spec = testing_support::random_spec(rng, 10, 6);
      const auto mu = moment_sequence<Rational>(spec.direct, spec.n);
      const auto lambda = infection_moments<Rational>(spec.infection, spec.n);
      for (const auto* seq : {&mu, &lambda})
        for (const auto& v : seq->values)
          if (v < 0 || v > 1) return Outcome{false, "moment outside [0,1]"};
      xi_table_general(spec.rule, lambda, spec.n).check(0.0);
      multi_period_pmf<Rational>(spec).check();
      multi_period_pmf<double>(spec).check(1e-9);
      if (spec.infection.is_dirac() && spec.rule.is_single_contact(spec.n)) mixed_quadrature_pmf(spec, {}).check(1e-9);
      ++surfaces;
    }
    for (const auto* date : {"2005-08-31", "2008-03-31"})
      for (const auto& start : latin_hypercube_starts(8, 1)) {
        pricing_surface(start, bundled(date), {}).check(1e-9);
        ++surfaces;
      }
    return Outcome{true, std::to_string(surfaces) + " surfaces: rows sum to 1, survival nondecreasing, xi/mu/lambda in [0,1]"};
  });

  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures;
}
