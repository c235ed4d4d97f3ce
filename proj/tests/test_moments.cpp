#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "support.hpp"

using namespace contagion;

namespace {

// E[theta^j] for Beta(a, b) by direct numerical integration of the density.
double beta_moment_by_integration(double a, double b, int j) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double norm = boost::math::beta(a, b);
  auto density = [&](double x, double xc) {
    // xc is the signed distance to the nearer endpoint
    const double y = x < 0.5 ? 1.0 - x : xc;
    if (x <= 0.0 || y <= 0.0) return 0.0;
    return std::pow(x, j + a - 1) * std::pow(y, b - 1) / norm;
  };
  return integrator.integrate(density, 0.0, 1.0);
}

}  // namespace

TEST(Rational, DecimalInputsAreExact) {
  EXPECT_EQ(to_rational(0.1), Rational(1, 10));
  EXPECT_EQ(to_rational(0.2), Rational(1, 5));
  EXPECT_EQ(parse_rational("1e-3"), Rational(1, 1000));
  EXPECT_EQ(parse_rational(" -2.5E+1 "), Rational(-25));
  EXPECT_EQ(parse_rational("3/12"), Rational(1, 4));
  EXPECT_THROW(parse_rational("0.1x"), DomainError);
  EXPECT_THROW(parse_rational("1/0"), DomainError);
  EXPECT_THROW(parse_rational(""), DomainError);
}

TEST(Rational, BinomialTableMatchesDirect) {
  BinomialTable<Rational> t(30);
  for (int n = 0; n <= 30; ++n)
    for (int k = -1; k <= n + 1; ++k) EXPECT_EQ(t(n, k), binomial<Rational>(n, k));
  EXPECT_DOUBLE_EQ(binomial<double>(10, 3), 120.0);
}

TEST(MixingLaw, DiracMomentsArePowers) {
  const auto law = MixingLaw::dirac(Rational(3, 10));
  const auto seq = moment_sequence<Rational>(law, 8);
  for (unsigned j = 0; j <= 8; ++j) EXPECT_EQ(seq[j], ipow(Rational(3, 10), j));
}

TEST(MixingLaw, BetaShapeFromMeanAndVariance) {
  const auto shape = beta_params_exact<Rational>(Rational(1, 10), Rational(1, 25));
  EXPECT_EQ(shape.alpha, Rational(1, 8));
  EXPECT_EQ(shape.beta, Rational(9, 8));
  const auto [a, b] = beta_params(0.1, 0.2);
  EXPECT_NEAR(a, 0.125, 1e-15);
  EXPECT_NEAR(b, 1.125, 1e-15);
}

TEST(MixingLaw, FirstTwoMomentsReproduceMeanAndVariance) {
  const auto law = MixingLaw::from_std_dev(0.1, 0.2);
  EXPECT_EQ(moment<Rational>(1, law), Rational(1, 10));
  EXPECT_EQ(moment<Rational>(2, law) - Rational(1, 100), Rational(1, 25));
}

TEST(MixingLaw, BetaMomentsMatchNumericalIntegration) {
  for (auto [r, sd] : {std::pair{0.1, 0.2}, {0.2, 0.2}, {0.5, 0.1}, {0.7, 0.3}, {0.01, 0.05}}) {
    const auto [a, b] = beta_params(r, sd);
    for (int j = 0; j <= 12; ++j) {
      const double exact = to_double(moment<Rational>(j, MixingLaw::from_std_dev(r, sd)));
      EXPECT_NEAR(exact, beta_moment_by_integration(a, b, j), 1e-8 * exact)
          << "r=" << r << " sd=" << sd << " j=" << j;
      EXPECT_NEAR(moment(j, r, sd), exact, 1e-13);
    }
  }
}

TEST(MixingLaw, RejectsInfeasibleParameters) {
  EXPECT_THROW(MixingLaw::from_std_dev(0.1, 0.3), VarianceTooLarge);  // 0.09 = 0.1 * 0.9
  EXPECT_THROW(MixingLaw::from_std_dev(0.1, 0.31), VarianceTooLarge);
  EXPECT_THROW(MixingLaw::from_std_dev(0.0, 0.1), DomainError);
  EXPECT_THROW(MixingLaw::from_std_dev(1.0, 0.1), DomainError);
  EXPECT_THROW(MixingLaw::dirac(1.5), DomainError);
  EXPECT_THROW(MixingLaw::from_variance(Rational(1, 2), Rational(-1, 100)), DomainError);
  EXPECT_NO_THROW(MixingLaw::dirac(0.0));
  EXPECT_NO_THROW(MixingLaw::dirac(1.0));
}

TEST(MomentSequence, CompleteMonotonicityHoldsForRandomLaws) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const auto law = testing_support::random_law(rng);
    const auto seq = moment_sequence<Rational>(law, 16);
    EXPECT_EQ(moment_sequence_defect(seq), "") << law.mean() << " " << law.variance();
    for (const auto& v : seq.values) {
      EXPECT_GE(v, 0);
      EXPECT_LE(v, 1);
    }
  }
}

TEST(MomentSequence, DefectDetectsNonMomentSequences) {
  MomentSequence<Rational> bad{{Rational(1), Rational(1, 5), Rational(1, 2)}};
  EXPECT_NE(moment_sequence_defect(bad), "");  // m_2 > m_1
  MomentSequence<Rational> not_normalized{{Rational(1, 2)}};
  EXPECT_EQ(moment_sequence_defect(not_normalized), "m_0 != 1");
  EXPECT_THROW(bad.require_order(5), InsufficientOrder);
}
