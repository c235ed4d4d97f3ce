#include <gtest/gtest.h>

#include "support.hpp"

using namespace contagion;

namespace {

QuoteSet market(const std::vector<double>& quotes, int names = 125) {
  QuoteSet qs;
  qs.names = names;
  const std::vector<std::pair<double, double>> bounds{{0, 0.03}, {0.03, 0.06}, {0.06, 0.09},
                                                      {0.09, 0.12}, {0.12, 0.20}, {0, 1}};
  const std::vector<std::string> names_list{"equity", "3-6", "6-9", "9-12", "12-20", "index"};
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    Instrument ins;
    ins.name = names_list[i];
    ins.tranche = {bounds[i].first, bounds[i].second, i == 0 ? QuoteUnit::upfront_pct : QuoteUnit::running_bp};
    ins.quote = quotes[i];
    qs.instruments.push_back(ins);
  }
  return qs;
}

LossSurface<double> point_masses(int n, const std::vector<int>& at) {
  LossSurface<double> s;
  s.n = n;
  for (int r : at) {
    std::vector<double> row(static_cast<std::size_t>(n) + 1, 0.0);
    row[r] = 1.0;
    s.rows.push_back(row);
  }
  return s;
}

}  // namespace

TEST(ExpectedTrancheLoss, FullStructureIsScaledMean) {
  const std::vector<double> pmf{0.5, 0.25, 0.125, 0.125};
  const double mean = 0.25 + 0.25 + 0.375;
  EXPECT_NEAR(expected_tranche_loss(pmf, {0, 1}, 0.4), 0.6 * mean / 3.0, 1e-15);
}

TEST(ExpectedTrancheLoss, PointMasses) {
  std::vector<double> pmf(126, 0.0);
  pmf[0] = 1.0;
  EXPECT_EQ(expected_tranche_loss(pmf, {0, 0.03}, 0.4), 0.0);
  pmf[0] = 0.0;
  pmf[125] = 1.0;
  EXPECT_NEAR(expected_tranche_loss(pmf, {0, 0.03}, 0.4), 0.03, 1e-15);
  EXPECT_NEAR(expected_tranche_loss(pmf, {0.12, 0.2}, 0.4), 0.08, 1e-15);
  EXPECT_THROW(expected_tranche_loss(pmf, {0.2, 0.1}, 0.4), DomainError);
}

TEST(ExpectedTrancheLoss, TranchesAddUpToPortfolioLoss) {
  ModelSpec s = pricing_spec({0.02, 0.05, 0.1}, market({1, 1, 1, 1, 1, 1}), PeriodMapping::scaled_quarterly);
  const auto surf = mixed_quadrature_pmf(s, {});
  const std::vector<double> cuts{0, 0.03, 0.06, 0.09, 0.12, 0.22, 1.0};
  for (int t = 0; t <= surf.periods(); ++t) {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      sum += expected_tranche_loss(surf.rows[t], {cuts[i], cuts[i + 1]}, 0.4);
    EXPECT_NEAR(sum, expected_tranche_loss(surf.rows[t], {0, 1}, 0.4), 1e-14);
  }
}

TEST(ExpectedTrancheLoss, NondecreasingInTime) {
  const auto qs = market({1, 1, 1, 1, 1, 1});
  const auto surf = pricing_surface({0.01, 0.03, 0.2}, qs, {});
  for (const auto& ins : qs.instruments) {
    const auto etl = etl_schedule(surf, ins.tranche, qs, PeriodMapping::scaled_quarterly);
    for (std::size_t i = 1; i < etl.size(); ++i) EXPECT_GE(etl[i], etl[i - 1] - 1e-15);
  }
}

TEST(TrancheSpread, ZeroLossSurface) {
  auto qs = market({1, 1, 1, 1, 1, 1}, 10);
  const auto surf = point_masses(10, std::vector<int>(21, 0));
  EngineSettings es;
  EXPECT_EQ(tranche_spread(surf, qs.instruments[1].tranche, qs, es), 0.0);
  double annuity = 0.0;
  for (int i = 1; i <= 20; ++i) annuity += std::exp(-0.03 * i / 4.0) * 0.25 * 0.03;
  EXPECT_NEAR(tranche_spread(surf, qs.instruments[0].tranche, qs, es), 100.0 * -0.05 * annuity / 0.03, 1e-12);
  es.floor_upfront = true;
  EXPECT_EQ(tranche_spread(surf, qs.instruments[0].tranche, qs, es), 0.0);
}

TEST(TrancheSpread, WipeOutAtSecondPaymentDate) {
  auto qs = market({1, 1, 1, 1, 1, 1}, 10);
  std::vector<int> at(21, 10);
  at[0] = at[1] = 0;
  const auto surf = point_masses(10, at);
  // protection D(t2) w, annuity D(t1) dt w
  const double expected = 1e4 * std::exp(-0.03 * 0.5) / (std::exp(-0.03 * 0.25) * 0.25);
  EXPECT_NEAR(tranche_spread(surf, {0.03, 0.06}, qs, {}), expected, 1e-12 * expected);
}

TEST(TrancheSpread, WipeOutAtFirstPaymentDateHasNoAnnuity) {
  auto qs = market({1, 1, 1, 1, 1, 1}, 10);
  std::vector<int> at(21, 10);
  at[0] = 0;
  EXPECT_THROW(tranche_spread(point_masses(10, at), {0.03, 0.06}, qs, {}), PricingError);
}

TEST(TrancheSpread, IndexIsTheFullTranche) {
  const auto qs = market({1, 1, 1, 1, 1, 1});
  const auto surf = pricing_surface({0.01, 0.02, 0.1}, qs, {});
  const auto legs = tranche_legs(etl_schedule(surf, {0, 1}, qs, PeriodMapping::scaled_quarterly), {0, 1}, qs);
  EXPECT_NEAR(model_quotes(surf, qs, {})[5], 1e4 * legs.protection / legs.annuity, 1e-12);
}

TEST(TrancheSpread, ContinuousInParameters) {
  const auto qs = market({1, 1, 1, 1, 1, 1});
  const ModelParams base{0.01, 0.03, 0.15};
  const auto a = model_quotes(base, qs, {});
  for (int k = 0; k < 3; ++k) {
    ModelParams bumped = base;
    (k == 0 ? bumped.p : k == 1 ? bumped.sigma_x : bumped.q) += 1e-6;
    const auto b = model_quotes(bumped, qs, {});
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(b[i] - a[i]) / std::abs(a[i]), 1e-2);
  }
}

TEST(PeriodMapping, ScaledQuarterlyPreservesAnnualSurvival) {
  const auto qs = market({1, 1, 1, 1, 1, 1});
  const auto pp = period_params({0.02, 0.04, 0.3}, qs, PeriodMapping::scaled_quarterly);
  EXPECT_NEAR(std::pow(1 - pp.p, 4), 0.98, 1e-15);
  EXPECT_NEAR(std::pow(1 - pp.q, 4), 0.7, 1e-15);
  EXPECT_NEAR(pp.sigma_x / pp.p, 2.0, 1e-12);
  EXPECT_EQ(pp.periods, 20);
  EXPECT_EQ(period_params({0.02, 0.04, 0.3}, qs, PeriodMapping::annual_steps).periods, 5);
  const auto raw = period_params({0.02, 0.04, 0.3}, qs, PeriodMapping::raw_per_period);
  EXPECT_EQ(raw.p, 0.02);
  EXPECT_EQ(raw.periods, 20);
}

TEST(PeriodMapping, AnnualStepsInterpolatesBetweenYears) {
  const auto qs = market({1, 1, 1, 1, 1, 1});
  EngineSettings es;
  es.mapping = PeriodMapping::annual_steps;
  const auto surf = pricing_surface({0.02, 0.04, 0.1}, qs, es);
  ASSERT_EQ(surf.periods(), 5);
  const auto etl = etl_schedule(surf, {0, 1}, qs, es.mapping);
  ASSERT_EQ(etl.size(), 21u);
  EXPECT_NEAR(etl[4], expected_tranche_loss(surf.rows[1], {0, 1}, 0.4), 1e-15);
  EXPECT_NEAR(etl[6], 0.5 * (etl[4] + etl[8]), 1e-15);
}

TEST(Rmse, MatchesPrintedTables) {
  const std::vector<double> mkt05{24, 81, 27, 15, 9, 36}, cal1{20, 114, 7, 1, 1, 29};
  EXPECT_NEAR(rmse(mkt05, cal1, std::vector<bool>(6, true)), 0.638, 5e-4);
  const auto qs08 = market({40, 480, 309, 215, 109, 123});
  const std::vector<double> mkt08{40, 480, 309, 215, 109, 123}, cal3{0, 478, 309, 215, 109, 0};
  EXPECT_NEAR(rmse(mkt08, cal3, variant_mask(3, qs08)), 0.002, 5e-4);
  EXPECT_EQ(rmse(mkt08, mkt08, std::vector<bool>(6, true)), 0.0);
  EXPECT_THROW(rmse(mkt08, mkt08, std::vector<bool>(6, false)), DomainError);
}

TEST(Rmse, VariantMasks) {
  const auto qs = market({1, 1, 1, 1, 1, 1});
  EXPECT_EQ(variant_mask(1, qs), (std::vector<bool>{1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(variant_mask(2, qs), (std::vector<bool>{0, 1, 1, 1, 1, 1}));
  EXPECT_EQ(variant_mask(3, qs), (std::vector<bool>{0, 1, 1, 1, 1, 0}));
  EXPECT_EQ(variant_mask(4, qs), (std::vector<bool>{1, 0, 0, 0, 0, 1}));
  EXPECT_THROW(variant_mask(5, qs), DomainError);
}

TEST(NelderMead, MinimizesRosenbrock) {
  auto rosen = [](const std::vector<double>& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  const auto res = nelder_mead(rosen, {-1.2, 1.0}, 0.5, 5000, 1e-10, 1e-30);
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.x[0], 1.0, 1e-6);
  EXPECT_NEAR(res.x[1], 1.0, 1e-6);
}

TEST(NelderMead, ReportsExhaustedBudget) {
  auto f = [](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1]; };
  EXPECT_FALSE(nelder_mead(f, {5.0, 5.0}, 1.0, 10, 1e-12, 0.0).converged);
}

TEST(Calibration, CoordinatesRoundTripAndRejectInfeasibleStarts) {
  const ModelParams m{0.01, 0.05, 0.2};
  const auto back = params_from_coordinates(coordinates_from_params(m));
  EXPECT_NEAR(back.p, m.p, 1e-15);
  EXPECT_NEAR(back.sigma_x, m.sigma_x, 1e-15);
  EXPECT_NEAR(back.q, m.q, 1e-15);
  EXPECT_THROW(coordinates_from_params({0.01, 0.2, 0.2}), DomainError);
  EXPECT_THROW(coordinates_from_params({0.0, 0.0, 0.2}), DomainError);
}

TEST(Calibration, LatinHypercubeCoversEachStratumOnce) {
  const auto starts = latin_hypercube_starts(8, 3);
  ASSERT_EQ(starts.size(), 8u);
  std::vector<int> hits(8, 0);
  const double lo = std::log(2e-4 / (1 - 2e-4)), hi = std::log(0.03 / 0.97);
  for (const auto& s : starts) {
    const double x = std::log(s.p / (1 - s.p));
    ++hits[std::min(7, static_cast<int>((x - lo) / (hi - lo) * 8))];
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Calibration, SyntheticRoundTripOnSmallPortfolio) {
  auto qs = market({1, 1, 1, 1, 1, 1}, 25);
  const ModelParams truth{0.01, 0.04, 0.15};
  const auto synthetic = model_quotes(truth, qs, {});
  for (std::size_t i = 0; i < synthetic.size(); ++i) qs.instruments[i].quote = synthetic[i];
  CalibrationSettings cs;
  cs.grid_starts = 3;
  const auto res = calibrate(1, qs, cs);
  EXPECT_LE(res.rmse, 1e-6);
  EXPECT_TRUE(res.converged);
  // stored rmse is reproducible from alpha*
  EXPECT_EQ(rmse(res.alpha_star, qs, 1, cs.engine), res.rmse);
  EXPECT_LT(res.alpha_star.sigma_x * res.alpha_star.sigma_x, res.alpha_star.p * (1 - res.alpha_star.p));
}

TEST(Calibration, RejectsEmptyVariant) {
  QuoteSet qs = market({1, 1, 1, 1, 1, 1});
  qs.instruments.erase(qs.instruments.begin());
  qs.instruments.pop_back();
  EXPECT_THROW(calibrate(4, qs), DomainError);
}
