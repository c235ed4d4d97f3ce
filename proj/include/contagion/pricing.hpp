#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "contagion/error.hpp"
#include "contagion/loss_engine.hpp"
#include "contagion/quadrature.hpp"

namespace contagion {

enum class QuoteUnit {
  running_bp,   // running spread in basis points
  upfront_pct,  // percent upfront on top of a fixed running coupon
};

struct TrancheSpec {
  double attachment = 0.0;
  double detachment = 1.0;
  QuoteUnit unit = QuoteUnit::running_bp;

  double width() const { return detachment - attachment; }

  void validate() const {
    if (!(attachment >= 0.0 && attachment < detachment && detachment <= 1.0))
      throw DomainError("tranche needs 0 <= attachment < detachment <= 1");
  }
};

struct Instrument {
  std::string name;
  TrancheSpec tranche;
  double quote = 0.0;  // market quote in the tranche's unit

  bool is_index() const { return name == "index"; }
  bool is_equity() const { return !is_index() && tranche.attachment == 0.0 && tranche.detachment < 1.0; }
};

struct QuoteSet {
  std::string as_of;
  double maturity = 5.0;  // years
  int frequency = 4;      // payments per year
  double rate = 0.03;     // continuously compounded
  double recovery = 0.4;
  int names = 125;
  std::vector<Instrument> instruments;

  int payments() const { return static_cast<int>(std::lround(maturity * frequency)); }

  void validate() const {
    if (instruments.empty()) throw DomainError("quote set has no instruments");
    if (!(maturity > 0.0) || frequency < 1) throw DomainError("maturity and frequency must be positive");
    if (!(recovery >= 0.0 && recovery < 1.0)) throw DomainError("recovery must lie in [0,1)");
    if (names < 1) throw DomainError("portfolio needs at least one name");
    for (const auto& ins : instruments) {
      ins.tranche.validate();
      if (!(ins.quote > 0.0)) throw DomainError("quote for " + ins.name + " must be positive");
    }
  }
};

// How annual parameters (p, sigma_X, q) become one model period.
enum class PeriodMapping {
  scaled_quarterly,  // period = one payment period, survival-consistent scaling
  raw_per_period,    // period = one payment period, parameters used as given
  annual_steps,      // period = one year, payment dates interpolated
};

struct ModelParams {
  double p = 0.0;
  double sigma_x = 0.0;
  double q = 0.0;
};

struct EngineSettings {
  PeriodMapping mapping = PeriodMapping::scaled_quarterly;
  int quadrature_nodes = 64;
  double upfront_running_bp = 500.0;
  bool floor_upfront = false;
};

// E[(L - a)^+ - (L - b)^+] with L = (1 - R) N / n.
template <typename S = double>
double expected_tranche_loss(std::span<const S> pmf, const TrancheSpec& tranche, double recovery) {
  tranche.validate();
  if (pmf.size() < 2) throw DomainError("pmf must cover 0..n with n >= 1");
  const double n = static_cast<double>(pmf.size() - 1);
  double etl = 0.0;
  for (std::size_t r = 0; r < pmf.size(); ++r) {
    const double loss = (1.0 - recovery) * static_cast<double>(r) / n;
    const double hit = std::max(loss - tranche.attachment, 0.0) - std::max(loss - tranche.detachment, 0.0);
    etl += to_double(pmf[r]) * hit;
  }
  return etl;
}

inline double expected_tranche_loss(const std::vector<double>& pmf, const TrancheSpec& tranche,
                                    double recovery) {
  return expected_tranche_loss<double>(std::span<const double>(pmf), tranche, recovery);
}

struct PeriodParams {
  double p = 0.0;
  double sigma_x = 0.0;
  double q = 0.0;
  int periods = 0;
};

inline PeriodParams period_params(const ModelParams& annual, const QuoteSet& quotes,
                                  PeriodMapping mapping) {
  PeriodParams out{annual.p, annual.sigma_x, annual.q, quotes.payments()};
  switch (mapping) {
    case PeriodMapping::scaled_quarterly: {
      const double dt = 1.0 / quotes.frequency;
      out.p = -std::expm1(dt * std::log1p(-annual.p));
      out.q = -std::expm1(dt * std::log1p(-annual.q));
      out.sigma_x = annual.p > 0.0 ? annual.sigma_x * out.p / annual.p : 0.0;
      break;
    }
    case PeriodMapping::raw_per_period:
      break;
    case PeriodMapping::annual_steps:
      out.periods = static_cast<int>(std::ceil(quotes.maturity - 1e-12));
      break;
  }
  return out;
}

inline ModelSpec pricing_spec(const ModelParams& annual, const QuoteSet& quotes, PeriodMapping mapping) {
  const PeriodParams pp = period_params(annual, quotes, mapping);
  ModelSpec spec;
  spec.n = quotes.names;
  spec.periods = pp.periods;
  spec.direct = pp.sigma_x > 0.0 ? MixingLaw::from_std_dev(pp.p, pp.sigma_x) : MixingLaw::dirac(pp.p);
  spec.infection = MixingLaw::dirac(pp.q);
  spec.rule = InfectionRule::threshold(1, InfectorRule::fresh_only);
  return spec;
}

inline LossSurface<double> pricing_surface(const ModelParams& annual, const QuoteSet& quotes,
                                           const EngineSettings& settings) {
  return mixed_quadrature_pmf(pricing_spec(annual, quotes, settings.mapping),
                              QuadratureSettings{settings.quadrature_nodes, MixingMode::redraw_per_period});
}

// Expected tranche loss at t_0 = 0 and each payment date.
inline std::vector<double> etl_schedule(const LossSurface<double>& surface, const TrancheSpec& tranche,
                                        const QuoteSet& quotes, PeriodMapping mapping) {
  const int payments = quotes.payments();
  std::vector<double> by_row;
  for (const auto& row : surface.rows) by_row.push_back(expected_tranche_loss(row, tranche, quotes.recovery));
  std::vector<double> out(static_cast<std::size_t>(payments) + 1, 0.0);
  if (mapping != PeriodMapping::annual_steps) {
    if (surface.periods() < payments) throw PricingError("surface shorter than the payment schedule");
    for (int i = 0; i <= payments; ++i) out[i] = by_row[i];
    return out;
  }
  for (int i = 0; i <= payments; ++i) {
    const double t = static_cast<double>(i) / quotes.frequency;
    const int lo = std::min(static_cast<int>(std::floor(t)), surface.periods());
    const int hi = std::min(lo + 1, surface.periods());
    const double w = t - lo;
    out[i] = (1.0 - w) * by_row[lo] + w * by_row[hi];
  }
  return out;
}

struct LegValues {
  double protection = 0.0;  // sum D(t_i) (ETL_i - ETL_{i-1})
  double annuity = 0.0;     // sum D(t_i) dt (b - a - ETL_i)
};

inline LegValues tranche_legs(std::span<const double> etl, const TrancheSpec& tranche, const QuoteSet& quotes) {
  LegValues legs;
  const double dt = 1.0 / quotes.frequency;
  for (std::size_t i = 1; i < etl.size(); ++i) {
    const double t = static_cast<double>(i) * dt;
    const double discount = std::exp(-quotes.rate * t);
    legs.protection += discount * (etl[i] - etl[i - 1]);
    legs.annuity += discount * dt * (tranche.width() - etl[i]);
  }
  return legs;
}

// Model quote in the tranche's own unit (bp running or percent upfront).
inline double tranche_quote(const LegValues& legs, const TrancheSpec& tranche, const EngineSettings& settings) {
  if (tranche.unit == QuoteUnit::upfront_pct) {
    double upfront = (legs.protection - settings.upfront_running_bp * 1e-4 * legs.annuity) / tranche.width();
    if (settings.floor_upfront) upfront = std::max(upfront, 0.0);
    return 100.0 * upfront;
  }
  if (!(legs.annuity > 1e-14)) throw PricingError("premium annuity vanishes: tranche wiped out");
  return 1e4 * legs.protection / legs.annuity;
}

inline double tranche_spread(const LossSurface<double>& surface, const TrancheSpec& tranche,
                             const QuoteSet& quotes, const EngineSettings& settings) {
  const auto etl = etl_schedule(surface, tranche, quotes, settings.mapping);
  return tranche_quote(tranche_legs(etl, tranche, quotes), tranche, settings);
}

inline std::vector<double> model_quotes(const LossSurface<double>& surface, const QuoteSet& quotes,
                                        const EngineSettings& settings) {
  std::vector<double> out;
  for (const auto& ins : quotes.instruments) out.push_back(tranche_spread(surface, ins.tranche, quotes, settings));
  return out;
}

inline std::vector<double> model_quotes(const ModelParams& params, const QuoteSet& quotes,
                                        const EngineSettings& settings) {
  return model_quotes(pricing_surface(params, quotes, settings), quotes, settings);
}

// Instruments entering each calibration variant:
// 1 all, 2 without equity, 3 without equity and index, 4 equity and index only.
inline bool included_in_variant(int variant, const Instrument& ins) {
  switch (variant) {
    case 1: return true;
    case 2: return !ins.is_equity();
    case 3: return !ins.is_equity() && !ins.is_index();
    case 4: return ins.is_equity() || ins.is_index();
    default: throw DomainError("calibration variant must be 1..4");
  }
}

inline std::vector<bool> variant_mask(int variant, const QuoteSet& quotes) {
  std::vector<bool> mask;
  for (const auto& ins : quotes.instruments) mask.push_back(included_in_variant(variant, ins));
  return mask;
}

// Root mean squared relative error over the included instruments.
inline double rmse(std::span<const double> market, std::span<const double> model, const std::vector<bool>& include) {
  if (market.size() != model.size() || market.size() != include.size())
    throw DomainError("quote vectors differ in length");
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < market.size(); ++i) {
    if (!include[i]) continue;
    const double rel = (market[i] - model[i]) / market[i];
    sum += rel * rel;
    ++count;
  }
  if (count == 0) throw DomainError("no instruments included in the RMSE");
  return std::sqrt(sum / count);
}

inline std::vector<double> market_quotes(const QuoteSet& quotes) {
  std::vector<double> out;
  for (const auto& ins : quotes.instruments) out.push_back(ins.quote);
  return out;
}

inline double rmse(const ModelParams& params, const QuoteSet& quotes, int variant, const EngineSettings& settings) {
  const auto model = model_quotes(params, quotes, settings);
  const auto market = market_quotes(quotes);
  return rmse(market, model, variant_mask(variant, quotes));
}

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Downhill simplex (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
// Converged when every vertex is within xtol of the best in max-norm, or the
// objective spread across the simplex is at most ftol.
template <typename F>
NelderMeadResult nelder_mead(F&& objective, std::vector<double> start, double step, int max_evaluations,
                             double xtol, double ftol) {
  const std::size_t dim = start.size();
  std::vector<std::vector<double>> simplex(dim + 1, start);
  for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += step;
  std::vector<double> values(dim + 1);
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = objective(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  for (std::size_t i = 0; i <= dim; ++i) values[i] = eval(simplex[i]);
  std::vector<std::size_t> order(dim + 1);

  while (true) {
    for (std::size_t i = 0; i <= dim; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const auto& best = simplex[order.front()];
    double spread = 0.0;
    for (std::size_t i = 1; i <= dim; ++i)
      for (std::size_t d = 0; d < dim; ++d) spread = std::max(spread, std::abs(simplex[order[i]][d] - best[d]));
    if (spread < xtol || values[order.back()] - values[order.front()] <= ftol) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= max_evaluations) break;

    const std::size_t worst = order.back();
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[order[i]][d] / static_cast<double>(dim);
    auto along = [&](double coef) {
      std::vector<double> x(dim);
      for (std::size_t d = 0; d < dim; ++d) x[d] = centroid[d] + coef * (simplex[worst][d] - centroid[d]);
      return x;
    };
    const double f_best = values[order.front()];
    const double f_second = values[order[dim - 1]];
    const double f_worst = values[worst];

    auto reflected = along(-1.0);
    const double f_r = eval(reflected);
    if (f_r < f_best) {
      auto expanded = along(-2.0);
      const double f_e = eval(expanded);
      if (f_e < f_r) {
        simplex[worst] = std::move(expanded);
        values[worst] = f_e;
      } else {
        simplex[worst] = std::move(reflected);
        values[worst] = f_r;
      }
      continue;
    }
    if (f_r < f_second) {
      simplex[worst] = std::move(reflected);
      values[worst] = f_r;
      continue;
    }
    const bool outside = f_r < f_worst;
    auto contracted = along(outside ? -0.5 : 0.5);
    const double f_c = eval(contracted);
    if (f_c < (outside ? f_r : f_worst)) {
      simplex[worst] = std::move(contracted);
      values[worst] = f_c;
      continue;
    }
    const auto anchor = simplex[order.front()];
    for (std::size_t i = 1; i <= dim; ++i) {
      auto& v = simplex[order[i]];
      for (std::size_t d = 0; d < dim; ++d) v[d] = anchor[d] + 0.5 * (v[d] - anchor[d]);
      values[order[i]] = eval(v);
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  res.x = simplex[best];
  res.value = values[best];
  return res;
}

// Unconstrained coordinates: logit p, logit(sigma_X / sqrt(p(1-p))), logit q.
inline ModelParams params_from_coordinates(const std::vector<double>& x) {
  constexpr double kEdge = 1e-12;
  auto logistic = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  ModelParams m;
  m.p = std::clamp(logistic(x[0]), kEdge, 1.0 - kEdge);
  const double ratio = std::clamp(logistic(x[1]), kEdge, 1.0 - 1e-9);
  m.sigma_x = ratio * std::sqrt(m.p * (1.0 - m.p));
  m.q = std::clamp(logistic(x[2]), 0.0, 1.0 - kEdge);
  return m;
}

inline std::vector<double> coordinates_from_params(const ModelParams& m) {
  auto logit = [](double v) {
    v = std::clamp(v, 1e-12, 1.0 - 1e-12);
    return std::log(v / (1.0 - v));
  };
  if (!(m.p > 0.0 && m.p < 1.0)) throw DomainError("start needs 0 < p < 1");
  if (!(m.q >= 0.0 && m.q < 1.0)) throw DomainError("start needs 0 <= q < 1");
  const double cap = std::sqrt(m.p * (1.0 - m.p));
  if (!(m.sigma_x >= 0.0 && m.sigma_x < cap)) throw DomainError("start needs 0 <= sigma_X < sqrt(p(1-p))");
  return {logit(m.p), logit(std::max(m.sigma_x / cap, 1e-9)), logit(m.q)};
}

struct CalibrationSettings {
  EngineSettings engine;
  std::vector<ModelParams> starts;  // explicit starts, tried before the grid
  int grid_starts = 8;              // Latin hypercube starts
  std::uint64_t seed = 2024;
  int max_evaluations = 3000;       // per simplex run
  int max_restarts = 4;
  double xtol = 1e-10;
  double ftol = 1e-22;              // on the mean squared relative error
  double step = 0.5;
  int threads = 1;
  bool validate_engine = true;      // exact-vs-quadrature smoke test first
};

struct StartOutcome {
  ModelParams start;
  ModelParams best;
  double rmse = 0.0;
  int evaluations = 0;
  int restarts = 0;
  bool converged = false;
};

struct CalibrationResult {
  int variant = 1;
  ModelParams alpha_star;
  double rmse = 0.0;
  std::vector<std::string> names;
  std::vector<double> market;
  std::vector<double> model;
  std::vector<bool> included;
  int restarts = 0;
  int iterations = 0;  // objective evaluations, all starts
  bool converged = false;
  std::vector<StartOutcome> starts;
};

// Latin hypercube over plausible annual parameters (in the logit coordinates).
inline std::vector<ModelParams> latin_hypercube_starts(int count, std::uint64_t seed) {
  std::vector<ModelParams> out;
  if (count <= 0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::array<std::array<double, 2>, 3> box{{{2e-4, 0.03}, {0.05, 0.8}, {0.01, 0.4}}};
  std::array<std::vector<int>, 3> perm;
  for (auto& pm : perm) {
    pm.resize(count);
    for (int i = 0; i < count; ++i) pm[i] = i;
    std::shuffle(pm.begin(), pm.end(), rng);
  }
  auto logit = [](double v) { return std::log(v / (1.0 - v)); };
  for (int i = 0; i < count; ++i) {
    std::vector<double> x(3);
    for (int d = 0; d < 3; ++d) {
      const double u = (perm[d][i] + unit(rng)) / count;
      const double lo = logit(box[d][0]), hi = logit(box[d][1]);
      x[d] = lo + u * (hi - lo);
    }
    out.push_back(params_from_coordinates(x));
  }
  return out;
}

inline StartOutcome calibrate_from(const ModelParams& start, int variant, const QuoteSet& quotes,
                                   const CalibrationSettings& settings) {
  const auto market = market_quotes(quotes);
  const auto mask = variant_mask(variant, quotes);
  auto objective = [&](const std::vector<double>& x) {
    const auto model = model_quotes(params_from_coordinates(x), quotes, settings.engine);
    const double e = rmse(market, model, mask);
    return e * e;
  };
  StartOutcome out;
  out.start = start;
  std::vector<double> x = coordinates_from_params(start);
  auto res = nelder_mead(objective, x, settings.step, settings.max_evaluations, settings.xtol, settings.ftol);
  out.evaluations = res.evaluations;
  for (int r = 0; r < settings.max_restarts; ++r) {
    auto again = nelder_mead(objective, res.x, settings.step * 0.1, settings.max_evaluations, settings.xtol,
                             settings.ftol);
    out.evaluations += again.evaluations;
    ++out.restarts;
    const bool improved = again.value < res.value * (1.0 - 1e-8);
    if (again.value <= res.value) res = std::move(again);
    if (!improved) break;
  }
  out.converged = res.converged;
  out.best = params_from_coordinates(res.x);
  out.rmse = std::sqrt(std::max(res.value, 0.0));
  return out;
}

// Multi-start simplex fit of (p, sigma_X, q) for one calibration variant.
inline CalibrationResult calibrate(int variant, const QuoteSet& quotes, const CalibrationSettings& settings = {}) {
  quotes.validate();
  const auto mask = variant_mask(variant, quotes);
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw DomainError("calibration variant selects no instruments");

  std::vector<ModelParams> starts = settings.starts;
  for (const auto& s : latin_hypercube_starts(settings.grid_starts, settings.seed)) starts.push_back(s);
  if (starts.empty()) throw DomainError("calibration needs at least one start");
  for (const auto& s : starts) coordinates_from_params(s);

  if (settings.validate_engine) {
    QuoteSet small = quotes;
    small.names = 12;
    small.maturity = 1.0;
    validate_quadrature(pricing_spec(starts.front(), small, settings.engine.mapping),
                        QuadratureSettings{settings.engine.quadrature_nodes, MixingMode::redraw_per_period}, 1e-8);
  }

  std::vector<StartOutcome> outcomes(starts.size());
  if (settings.threads > 1) {
    std::vector<std::future<StartOutcome>> jobs;
    for (const auto& s : starts)
      jobs.push_back(std::async(std::launch::async, [&, s] { return calibrate_from(s, variant, quotes, settings); }));
    for (std::size_t i = 0; i < jobs.size(); ++i) outcomes[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < starts.size(); ++i) outcomes[i] = calibrate_from(starts[i], variant, quotes, settings);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < outcomes.size(); ++i)
    if (outcomes[i].rmse < outcomes[best].rmse) best = i;

  CalibrationResult result;
  result.variant = variant;
  result.alpha_star = outcomes[best].best;
  result.converged = outcomes[best].converged;
  for (const auto& o : outcomes) {
    result.restarts += o.restarts;
    result.iterations += o.evaluations;
  }
  result.starts = outcomes;
  for (const auto& ins : quotes.instruments) result.names.push_back(ins.name);
  result.market = market_quotes(quotes);
  result.model = model_quotes(result.alpha_star, quotes, settings.engine);
  result.included = mask;
  result.rmse = rmse(result.market, result.model, mask);
  return result;
}

}  // namespace contagion
