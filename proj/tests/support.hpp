#pragma once

#include <random>

#include "contagion.hpp"

namespace testing_support {

using contagion::MixingLaw;
using contagion::Rational;

// Small-denominator rationals keep exact arithmetic fast.
inline Rational random_probability(std::mt19937_64& rng, int den = 20) {
  std::uniform_int_distribution<int> d(1, den - 1);
  return Rational(d(rng), den);
}

// Dirac or Beta law with variance a random fraction of the feasible cap.
inline MixingLaw random_law(std::mt19937_64& rng) {
  const Rational mean = random_probability(rng);
  if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) return MixingLaw::dirac(mean);
  const Rational share(std::uniform_int_distribution<int>(1, 9)(rng), 10);
  return MixingLaw::from_variance(mean, Rational(share * mean * (1 - mean)));
}

inline contagion::InfectionRule random_rule(std::mt19937_64& rng) {
  using contagion::InfectorRule;
  const int theta = std::uniform_int_distribution<int>(1, 3)(rng);
  const auto g = std::uniform_int_distribution<int>(0, 1)(rng) ? InfectorRule::domino : InfectorRule::fresh_only;
  return contagion::InfectionRule::threshold(theta, g);
}

inline contagion::ModelSpec random_spec(std::mt19937_64& rng, int max_n, int max_t) {
  contagion::ModelSpec s;
  s.n = std::uniform_int_distribution<int>(1, max_n)(rng);
  s.periods = std::uniform_int_distribution<int>(1, max_t)(rng);
  s.direct = random_law(rng);
  s.infection = random_law(rng);
  s.rule = random_rule(rng);
  return s;
}

}  // namespace testing_support
