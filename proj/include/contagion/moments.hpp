#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "contagion/error.hpp"
#include "contagion/rational.hpp"

namespace contagion {

// Law of the hidden factor behind an exchangeable Bernoulli family: a Dirac
// mass at `mean` when the variance is zero, otherwise the Beta law with the
// given mean and variance. Mean and variance are held exactly.
class MixingLaw {
 public:
  MixingLaw() = default;

  static MixingLaw dirac(const Rational& mean) { return MixingLaw(mean, Rational(0)); }
  static MixingLaw dirac(double mean) { return dirac(to_rational(mean)); }

  static MixingLaw from_variance(const Rational& mean, const Rational& variance) {
    return MixingLaw(mean, variance);
  }

  // The std_dev is read as its shortest decimal and squared exactly.
  static MixingLaw from_std_dev(double mean, double std_dev) {
    if (!(std_dev >= 0.0)) throw DomainError("std_dev must be nonnegative");
    Rational s = to_rational(std_dev);
    return MixingLaw(to_rational(mean), Rational(s * s));
  }

  const Rational& mean() const { return mean_; }
  const Rational& variance() const { return variance_; }
  double mean_d() const { return mean_.get_d(); }
  double variance_d() const { return variance_.get_d(); }
  double std_dev() const { return std::sqrt(variance_.get_d()); }
  bool is_dirac() const { return variance_ == 0; }

  friend bool operator==(const MixingLaw& a, const MixingLaw& b) {
    return a.mean_ == b.mean_ && a.variance_ == b.variance_;
  }

 private:
  MixingLaw(const Rational& mean, const Rational& variance)
      : mean_(mean), variance_(variance) {
    mean_.canonicalize();
    variance_.canonicalize();
    if (mean_ < 0 || mean_ > 1) throw DomainError("mixing mean must lie in [0,1]");
    if (variance_ < 0) throw DomainError("mixing variance must be nonnegative");
    if (variance_ > 0) {
      if (mean_ == 0 || mean_ == 1)
        throw DomainError("degenerate mean 0 or 1 requires std_dev = 0");
      if (variance_ >= mean_ * (1 - mean_))
        throw VarianceTooLarge("std_dev^2 must be strictly below mean (1 - mean)");
    }
  }

  Rational mean_{0};
  Rational variance_{0};
};

template <typename S>
struct BetaShape {
  S alpha;
  S beta;
};

// Beta shape parameters matching a mean and variance.
template <typename S>
BetaShape<S> beta_params_exact(const S& mean, const S& variance) {
  if (!(mean > 0 && mean < 1)) throw DomainError("Beta mean must lie in (0,1)");
  if (!(variance > 0)) throw DomainError("Beta variance must be positive");
  const S spread = mean * (S(1) - mean);
  if (!(variance < spread))
    throw VarianceTooLarge("std_dev^2 must be strictly below mean (1 - mean)");
  const S c = spread / variance - S(1);
  return {S(mean * c), S((S(1) - mean) * c)};
}

inline std::pair<double, double> beta_params(double mean, double std_dev) {
  if (!(mean > 0.0 && mean < 1.0)) throw DomainError("Beta mean must lie in (0,1)");
  if (!(std_dev > 0.0)) throw DomainError("Beta std_dev must be positive");
  auto shape = beta_params_exact<double>(mean, std_dev * std_dev);
  return {shape.alpha, shape.beta};
}

template <typename S>
BetaShape<S> beta_params(const MixingLaw& law) {
  if constexpr (is_rational_v<S>) {
    return beta_params_exact<Rational>(law.mean(), law.variance());
  } else {
    return beta_params_exact<S>(static_cast<S>(law.mean_d()),
                                static_cast<S>(law.variance_d()));
  }
}

// Ordered moments m_0 = 1, m_1, ..., m_J of a [0,1]-valued factor.
template <typename S>
struct MomentSequence {
  std::vector<S> values;

  std::size_t order() const { return values.empty() ? 0 : values.size() - 1; }
  const S& operator[](std::size_t j) const { return values[j]; }

  void require_order(std::size_t needed) const {
    if (values.empty() || order() < needed)
      throw InsufficientOrder("moment sequence has order " + std::to_string(order()) +
                              ", need " + std::to_string(needed));
  }
};

// E[Theta^j] for the law. Beta moments use the telescoped Gamma ratio
// prod_{i<j} (alpha + i) / (alpha + beta + i).
template <typename S>
S moment(unsigned j, const MixingLaw& law) {
  if (law.is_dirac()) return ipow(from_rational<S>(law.mean()), j);
  const auto shape = beta_params<S>(law);
  S m(1);
  for (unsigned i = 0; i < j; ++i)
    m = m * (shape.alpha + S(i)) / (shape.alpha + shape.beta + S(i));
  return m;
}

inline double moment(unsigned j, double mean, double std_dev) {
  if (std_dev == 0.0) {
    if (!(mean >= 0.0 && mean <= 1.0)) throw DomainError("mean must lie in [0,1]");
    return std::pow(mean, static_cast<double>(j));
  }
  auto [a, b] = beta_params(mean, std_dev);
  double m = 1.0;
  for (unsigned i = 0; i < j; ++i) m *= (a + i) / (a + b + i);
  return m;
}

template <typename S>
MomentSequence<S> moment_sequence(const MixingLaw& law, std::size_t max_order) {
  MomentSequence<S> seq;
  seq.values.reserve(max_order + 1);
  seq.values.emplace_back(1);
  if (law.is_dirac()) {
    const S r = from_rational<S>(law.mean());
    for (std::size_t j = 1; j <= max_order; ++j) seq.values.push_back(S(seq.values.back() * r));
    return seq;
  }
  const auto shape = beta_params<S>(law);
  for (std::size_t j = 1; j <= max_order; ++j) {
    const S i(static_cast<long>(j - 1));
    seq.values.push_back(S(seq.values.back() * (shape.alpha + i) /
                           (shape.alpha + shape.beta + i)));
  }
  return seq;
}

// Checks m_0 = 1 and (-1)^k Delta^k m_j >= -tol for all k, j within the
// sequence. Returns a description of the first failure, empty when valid.
template <typename S>
std::string moment_sequence_defect(const MomentSequence<S>& seq, double tol = 0.0) {
  if (seq.values.empty()) return "empty sequence";
  if (seq.values[0] != S(1)) return "m_0 != 1";
  std::vector<S> diff = seq.values;
  for (std::size_t k = 0; k < seq.values.size(); ++k) {
    for (std::size_t j = 0; j < diff.size(); ++j) {
      if (to_double(diff[j]) < -tol || (tol == 0.0 && diff[j] < 0))
        return "alternating difference of order " + std::to_string(k) + " at index " +
               std::to_string(j) + " is negative";
    }
    if (diff.size() <= 1) break;
    for (std::size_t j = 0; j + 1 < diff.size(); ++j) diff[j] = diff[j] - diff[j + 1];
    diff.pop_back();
  }
  return {};
}

}  // namespace contagion
