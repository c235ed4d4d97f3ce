#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "contagion/error.hpp"
#include "contagion/moments.hpp"
#include "contagion/rational.hpp"

namespace contagion {

// How many defaulted firms may infect in a period, as a function of
// u = N_{t-1} and l = N_t^D.
enum class InfectorRule {
  fresh_only,  // g(u,l) = l
  domino,      // g(u,l) = u + l
  custom,      // g(u,l) read from a table
};

// Contagion mechanism: f maps the number of infecting contacts to {0,1},
// g sizes the infector set.
class InfectionRule {
 public:
  InfectionRule() = default;

  // f(x) = 1_{x >= theta}
  static InfectionRule threshold(int theta, InfectorRule g = InfectorRule::fresh_only) {
    if (theta < 0) throw DomainError("infection threshold must be nonnegative");
    InfectionRule r;
    r.threshold_ = theta;
    r.g_ = g;
    return r;
  }

  static InfectionRule table(std::vector<int> f, InfectorRule g = InfectorRule::fresh_only) {
    for (int v : f)
      if (v != 0 && v != 1) throw DomainError("f table must be {0,1}-valued");
    InfectionRule r;
    r.threshold_.reset();
    r.table_ = std::move(f);
    r.g_ = g;
    return r;
  }

  // rows indexed by u, columns by l; g_table[u][l] in {0..u+l}
  InfectionRule with_custom_g(std::vector<std::vector<int>> g_table) const {
    InfectionRule r = *this;
    r.g_ = InfectorRule::custom;
    r.g_table_ = std::move(g_table);
    return r;
  }

  InfectionRule with_infectors(InfectorRule g) const {
    if (g == InfectorRule::custom) throw DomainError("custom g requires a table");
    InfectionRule r = *this;
    r.g_ = g;
    r.g_table_.clear();
    return r;
  }

  const std::optional<int>& threshold_form() const { return threshold_; }
  const std::vector<int>& table_form() const { return table_; }
  InfectorRule infectors() const { return g_; }
  const std::vector<std::vector<int>>& g_table() const { return g_table_; }

  bool f(int x) const {
    if (threshold_) return x >= *threshold_;
    if (x < 0 || x >= static_cast<int>(table_.size()))
      throw DomainError("f table too short for argument " + std::to_string(x));
    return table_[x] != 0;
  }

  int g(int u, int l) const {
    switch (g_) {
      case InfectorRule::fresh_only:
        return l;
      case InfectorRule::domino:
        return u + l;
      case InfectorRule::custom:
        if (u < 0 || u >= static_cast<int>(g_table_.size()) || l < 0 ||
            l >= static_cast<int>(g_table_[u].size()))
          throw DomainError("custom g table has no entry for (" + std::to_string(u) + "," +
                            std::to_string(l) + ")");
        return g_table_[u][l];
    }
    return l;
  }

  // f tabulated on 0..n.
  std::vector<int> canonical_table(int n) const {
    std::vector<int> out(static_cast<std::size_t>(n) + 1);
    for (int x = 0; x <= n; ++x) out[x] = f(x) ? 1 : 0;
    return out;
  }

  // True when f agrees with 1_{x >= 1} on 0..n.
  bool is_single_contact(int n) const {
    for (int x = 0; x <= n; ++x)
      if (f(x) != (x >= 1)) return false;
    return true;
  }

  // Throws on hard violations; returns soft warnings.
  std::vector<std::string> validate(int n) const {
    std::vector<std::string> warnings;
    if (!threshold_ && static_cast<int>(table_.size()) < n + 1)
      throw DomainError("f table needs n + 1 = " + std::to_string(n + 1) + " entries");
    if (f(0))
      warnings.emplace_back("f(0) = 1: survivors default without any infecting contact");
    for (int u = 0; u <= n; ++u) {
      for (int l = 0; u + l <= n; ++l) {
        const int z = g(u, l);
        if (z < 0 || z > u + l)
          throw DomainError("g(" + std::to_string(u) + "," + std::to_string(l) + ") = " +
                            std::to_string(z) + " outside 0..u+l");
      }
    }
    return warnings;
  }

 private:
  std::optional<int> threshold_ = 1;
  std::vector<int> table_;
  InfectorRule g_ = InfectorRule::fresh_only;
  std::vector<std::vector<int>> g_table_;
};

// P[sum over a group of m exchangeable indicators = k] from their order-k
// coefficients (Waring's formula).
template <typename S>
S waring_pmf(const MomentSequence<S>& moments, int m, int k) {
  if (m < 0) throw DomainError("group size must be nonnegative");
  if (k < 0 || k > m) return S(0);
  moments.require_order(static_cast<std::size_t>(m));
  S sum(0);
  for (int j = 0; j <= m - k; ++j) {
    S term = binomial<S>(m - k, j) * moments[j + k];
    if (j % 2) sum -= term;
    else sum += term;
  }
  return S(binomial<S>(m, k) * sum);
}

// eta_{k,z}(gamma), gamma = 0..kz: the f-weighted count of ways k targets
// can collect gamma contacts in total from z infectors.
template <typename S>
std::vector<S> eta_recursion(const InfectionRule& rule, int k, int z) {
  if (k < 0 || z < 0) throw DomainError("eta_recursion needs k, z >= 0");
  std::vector<S> eta{S(1)};
  std::vector<S> fc(static_cast<std::size_t>(z) + 1);
  for (int x = 0; x <= z; ++x) fc[x] = rule.f(x) ? binomial<S>(z, x) : S(0);
  for (int level = 1; level <= k; ++level) {
    std::vector<S> next(static_cast<std::size_t>(level) * z + 1, S(0));
    for (int gamma = 0; gamma <= level * z; ++gamma) {
      const int i_min = std::max(0, gamma - z);
      const int i_max = std::min(gamma, (level - 1) * z);
      S acc(0);
      for (int i = i_min; i <= i_max; ++i) acc += fc[gamma - i] * eta[i];
      next[gamma] = acc;
    }
    eta = std::move(next);
  }
  return eta;
}

// xi_k(z) = P[k given survivors are all infected | z infectors], stored for
// k + z <= n.
template <typename S>
class XiTable {
 public:
  XiTable() = default;
  explicit XiTable(int n) : n_(n) {
    entries_.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) entries_[k].assign(static_cast<std::size_t>(n - k) + 1, S(0));
  }

  int n() const { return n_; }
  const S& operator()(int k, int z) const { return entries_.at(k).at(z); }
  S& at(int k, int z) { return entries_.at(k).at(z); }

  friend bool operator==(const XiTable& a, const XiTable& b) {
    return a.n_ == b.n_ && a.entries_ == b.entries_;
  }

  // Throws InvariantViolation when a cell leaves [0,1] or xi_0 != 1.
  void check(double tol = 0.0) const {
    for (int k = 0; k <= n_; ++k) {
      for (int z = 0; z + k <= n_; ++z) {
        const S& v = entries_[k][z];
        const bool bad = is_rational_v<S> ? (v < 0 || v > 1)
                                          : (to_double(v) < -tol || to_double(v) > 1.0 + tol);
        if (bad)
          throw InvariantViolation("xi_" + std::to_string(k) + "(" + std::to_string(z) +
                                   ") = " + std::to_string(to_double(v)) +
                                   " outside [0,1]; lambda is not a moment sequence");
        if (k == 0 && v != S(1)) throw InvariantViolation("xi_0(z) must equal 1");
      }
    }
  }

 private:
  int n_ = 0;
  std::vector<std::vector<S>> entries_;
};

namespace detail {

// Largest z*k over the cells k + z <= n.
inline int max_joint_contacts(int n) { return (n / 2) * (n - n / 2); }

// all_ones_then_zeros[a][b] = sum_j C(b,j) (-1)^j lambda_{a+j}: probability that a
// specific a variables are 1 and another specific b are 0.
template <typename S>
std::vector<std::vector<S>> alternating_differences(const MomentSequence<S>& lambda, int max_total) {
  lambda.require_order(static_cast<std::size_t>(max_total));
  std::vector<std::vector<S>> d(static_cast<std::size_t>(max_total) + 1);
  for (int a = 0; a <= max_total; ++a) {
    d[a].resize(static_cast<std::size_t>(max_total - a) + 1);
    d[a][0] = lambda[a];
  }
  for (int b = 1; b <= max_total; ++b)
    for (int a = 0; a + b <= max_total; ++a) d[a][b] = d[a][b - 1] - d[a + 1][b - 1];
  return d;
}

}  // namespace detail

// Builds the full xi table for an arbitrary f from eta and the infection
// moments lambda (needs order >= max zk = floor(n/2) ceil(n/2)).
template <typename S>
XiTable<S> xi_table_general(const InfectionRule& rule, const MomentSequence<S>& lambda, int n,
                            double tol = 1e-12) {
  if (n < 0) throw DomainError("n must be nonnegative");
  const int max_total = detail::max_joint_contacts(n);
  const auto diff = detail::alternating_differences(lambda, max_total);
  XiTable<S> xi(n);
  for (int z = 0; z <= n; ++z) xi.at(0, z) = S(1);
  for (int z = 0; z <= n; ++z) {
    std::vector<S> fc(static_cast<std::size_t>(z) + 1);
    for (int x = 0; x <= z; ++x) fc[x] = rule.f(x) ? binomial<S>(z, x) : S(0);
    std::vector<S> eta{S(1)};
    for (int k = 1; k + z <= n; ++k) {
      std::vector<S> next(static_cast<std::size_t>(k) * z + 1, S(0));
      S acc(0);
      for (int gamma = 0; gamma <= k * z; ++gamma) {
        const int i_min = std::max(0, gamma - z);
        const int i_max = std::min(gamma, (k - 1) * z);
        S e(0);
        for (int i = i_min; i <= i_max; ++i) e += fc[gamma - i] * eta[i];
        next[gamma] = e;
        if (e != 0) acc += e * diff[gamma][k * z - gamma];
      }
      xi.at(k, z) = acc;
      eta = std::move(next);
    }
  }
  xi.check(tol);
  return xi;
}

// Inclusion-exclusion closed form of xi_k(z) for f = 1_{x >= 1}:
// sum_i C(k,i) sum_alpha C(zi,alpha) (-1)^{i+alpha} lambda_alpha.
template <typename S>
S xi_indicator_closed_form(const MomentSequence<S>& lambda, int k, int z) {
  if (k < 0 || z < 0) throw DomainError("xi needs k, z >= 0");
  lambda.require_order(static_cast<std::size_t>(k) * static_cast<std::size_t>(z));
  S total(0);
  for (int i = 0; i <= k; ++i) {
    S inner(0);
    for (int a = 0; a <= z * i; ++a) {
      S term = binomial<S>(z * i, a) * lambda[a];
      if (a % 2) inner -= term;
      else inner += term;
    }
    S outer = binomial<S>(k, i) * inner;
    if (i % 2) total -= outer;
    else total += outer;
  }
  return total;
}

template <typename S>
XiTable<S> xi_table_indicator(const MomentSequence<S>& lambda, int n, double tol = 1e-12) {
  XiTable<S> xi(n);
  for (int k = 0; k <= n; ++k)
    for (int z = 0; z + k <= n; ++z) xi.at(k, z) = xi_indicator_closed_form(lambda, k, z);
  xi.check(tol);
  return xi;
}

// Infection moments lambda_0..lambda_{max zk} needed by an n-firm xi table.
template <typename S>
MomentSequence<S> infection_moments(const MixingLaw& law, int n) {
  return moment_sequence<S>(law, static_cast<std::size_t>(detail::max_joint_contacts(n)));
}

}  // namespace contagion
