#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "contagion/error.hpp"
#include "contagion/kernel.hpp"
#include "contagion/moments.hpp"
#include "contagion/rational.hpp"

namespace contagion {

struct ModelSpec {
  int n = 1;
  int periods = 1;
  MixingLaw direct;     // hidden factor of the direct defaults, mean p
  MixingLaw infection;  // hidden factor of the infections, mean q
  InfectionRule rule;

  std::vector<std::string> validate() const {
    if (n < 1) throw DomainError("n must be at least 1");
    if (periods < 1) throw DomainError("T must be at least 1");
    return rule.validate(n);
  }

  bool is_iid() const { return direct.is_dirac() && infection.is_dirac(); }
};

// PMF of N_t on {0..n} for t = 0..T; row 0 is the point mass at 0.
template <typename S>
struct LossSurface {
  int n = 0;
  std::vector<std::vector<S>> rows;

  int periods() const { return static_cast<int>(rows.size()) - 1; }
  const std::vector<S>& row(int t) const { return rows.at(t); }

  LossSurface<double> to_double() const {
    LossSurface<double> out;
    out.n = n;
    for (const auto& r : rows) {
      std::vector<double> d;
      d.reserve(r.size());
      for (const auto& v : r) d.push_back(contagion::to_double(v));
      out.rows.push_back(std::move(d));
    }
    return out;
  }

  // Row sums equal 1 and survival functions are nondecreasing in t.
  void check(double tol = 1e-9) const {
    for (std::size_t t = 0; t < rows.size(); ++t) {
      S total(0);
      for (const auto& v : rows[t]) {
        if (is_rational_v<S> ? v < 0 : contagion::to_double(v) < -tol)
          throw InvariantViolation("negative probability in row " + std::to_string(t));
        total += v;
      }
      const bool bad = is_rational_v<S> ? total != 1 : std::abs(contagion::to_double(total) - 1.0) > tol;
      if (bad)
        throw InvariantViolation("row " + std::to_string(t) + " sums to " +
                                 std::to_string(contagion::to_double(total)));
    }
    for (std::size_t t = 1; t < rows.size(); ++t) {
      S prev(0), cur(0);
      for (int r = n; r >= 0; --r) {
        prev += rows[t - 1][r];
        cur += rows[t][r];
        const bool bad = is_rational_v<S> ? cur < prev
                                          : contagion::to_double(cur) < contagion::to_double(prev) - tol;
        if (bad)
          throw InvariantViolation("survival function decreased between t=" +
                                   std::to_string(t - 1) + " and t=" + std::to_string(t));
      }
    }
  }
};

// One-period law of Davis and Lo (i.i.d. X and Y, single contact infects,
// only direct defaulters infect).
template <typename S>
std::vector<S> davis_lo_pmf(int n, const S& p, const S& q) {
  if (n < 1) throw DomainError("n must be at least 1");
  if (p < 0 || p > 1 || q < 0 || q > 1) throw DomainError("p and q must lie in [0,1]");
  const S one(1);
  const S p_bar = one - p;
  const S q_bar = one - q;
  std::vector<S> pmf(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    S alpha = ipow(p, k) * ipow(p_bar, n - k) * ipow(q_bar, static_cast<unsigned long>(k) * (n - k));
    for (int i = 1; i <= k - 1; ++i) {
      alpha += binomial<S>(k, i) * ipow(p, i) * ipow(p_bar, n - i) *
               ipow(S(one - ipow(q_bar, i)), k - i) *
               ipow(q_bar, static_cast<unsigned long>(i) * (n - k));
    }
    pmf[k] = binomial<S>(n, k) * alpha;
  }
  return pmf;
}

// One-period law for possibly non-exchangeable direct defaults summarized by
// their averaged coefficients mu_k(Omega), and exchangeable infections.
template <typename S>
std::vector<S> one_period_pmf(int n, const MomentSequence<S>& mu, const XiTable<S>& xi,
                              const InfectionRule& rule) {
  if (n < 1) throw DomainError("n must be at least 1");
  mu.require_order(static_cast<std::size_t>(n));
  if (xi.n() < n) throw InsufficientOrder("xi table smaller than n");
  std::vector<S> pmf(static_cast<std::size_t>(n) + 1, S(0));
  for (int r = 0; r <= n; ++r) {
    S outer(0);
    for (int k = 0; k <= r; ++k) {
      const int z = rule.g(0, k);
      S infect(0);
      for (int a = 0; a <= n - r; ++a) {
        S term = binomial<S>(n - r, a) * xi(a + r - k, z);
        if (a % 2) infect -= term;
        else infect += term;
      }
      S direct(0);
      for (int j = 0; j <= n - k; ++j) {
        S term = binomial<S>(n - k, j) * mu[j + k];
        if (j % 2) direct -= term;
        else direct += term;
      }
      outer += binomial<S>(r, k) * infect * direct;
    }
    pmf[r] = binomial<S>(n, r) * outer;
  }
  return pmf;
}

template <typename S>
std::vector<S> one_period_pmf(const ModelSpec& spec) {
  spec.validate();
  const auto mu = moment_sequence<S>(spec.direct, static_cast<std::size_t>(spec.n));
  const auto lambda = infection_moments<S>(spec.infection, spec.n);
  const auto xi = xi_table_general(spec.rule, lambda, spec.n);
  return one_period_pmf(spec.n, mu, xi, spec.rule);
}

// Stationary transition matrix P[N_t = r | N_{t-1} = k], upper triangular.
template <typename S>
struct TransitionKernel {
  int n = 0;
  std::vector<std::vector<S>> prob;  // prob[k][r], r >= k
};

// direct(gamma, m): P[a given gamma survivors default directly and another
// given m do not]. infect(a, b, z): P[a given non-direct survivors are
// infected and another given b are not | z infectors].
template <typename S, typename Direct, typename Infect>
TransitionKernel<S> assemble_kernel(int n, const InfectionRule& rule, Direct&& direct,
                                    Infect&& infect) {
  BinomialTable<S> c(n);
  TransitionKernel<S> kernel;
  kernel.n = n;
  kernel.prob.assign(static_cast<std::size_t>(n) + 1, std::vector<S>(static_cast<std::size_t>(n) + 1, S(0)));
  for (int k = 0; k <= n; ++k) {
    for (int r = k; r <= n; ++r) {
      S acc(0);
      for (int gamma = 0; gamma <= r - k; ++gamma) {
        const int z = rule.g(k, gamma);
        acc += c(r - k, gamma) * direct(gamma, n - k - gamma) * infect(r - k - gamma, n - r, z);
      }
      kernel.prob[k][r] = c(n - k, r - k) * acc;
    }
  }
  return kernel;
}

template <typename S>
LossSurface<S> propagate(const TransitionKernel<S>& kernel, int periods) {
  const int n = kernel.n;
  LossSurface<S> surface;
  surface.n = n;
  std::vector<S> row(static_cast<std::size_t>(n) + 1, S(0));
  row[0] = S(1);
  surface.rows.push_back(row);
  for (int t = 1; t <= periods; ++t) {
    std::vector<S> next(static_cast<std::size_t>(n) + 1, S(0));
    for (int k = 0; k <= n; ++k) {
      if (row[k] == 0) continue;
      for (int r = k; r <= n; ++r) next[r] += row[k] * kernel.prob[k][r];
    }
    row = std::move(next);
    surface.rows.push_back(row);
  }
  return surface;
}

// Multi-period law under exchangeable direct defaults (coefficients mu) and
// exchangeable infections (table xi), stationary in t.
template <typename S>
LossSurface<S> multi_period_pmf(int n, int periods, const MomentSequence<S>& mu,
                                const XiTable<S>& xi, const InfectionRule& rule) {
  if (n < 1 || periods < 1) throw DomainError("need n >= 1 and T >= 1");
  mu.require_order(static_cast<std::size_t>(n));
  if (xi.n() < n) throw InsufficientOrder("xi table smaller than n");
  BinomialTable<S> c(n);

  // direct_tab[gamma][m] = sum_alpha C(m,alpha) (-1)^alpha mu_{gamma+alpha}
  std::vector<std::vector<S>> direct_tab(static_cast<std::size_t>(n) + 1);
  for (int gamma = 0; gamma <= n; ++gamma) {
    direct_tab[gamma].resize(static_cast<std::size_t>(n - gamma) + 1);
    for (int m = 0; gamma + m <= n; ++m) {
      S acc(0);
      for (int a = 0; a <= m; ++a) {
        S term = c(m, a) * mu[gamma + a];
        if (a % 2) acc -= term;
        else acc += term;
      }
      direct_tab[gamma][m] = acc;
    }
  }
  // infect_tab[z][a][b] = sum_j C(b,j) (-1)^j xi_{a+j}(z)
  std::vector<std::vector<std::vector<S>>> infect_tab(static_cast<std::size_t>(n) + 1);
  for (int z = 0; z <= n; ++z) {
    infect_tab[z].resize(static_cast<std::size_t>(n - z) + 1);
    for (int a = 0; a + z <= n; ++a) {
      infect_tab[z][a].resize(static_cast<std::size_t>(n - z - a) + 1);
      for (int b = 0; a + b + z <= n; ++b) {
        S acc(0);
        for (int j = 0; j <= b; ++j) {
          S term = c(b, j) * xi(a + j, z);
          if (j % 2) acc -= term;
          else acc += term;
        }
        infect_tab[z][a][b] = acc;
      }
    }
  }
  const auto kernel = assemble_kernel<S>(
      n, rule, [&](int gamma, int m) -> const S& { return direct_tab[gamma][m]; },
      [&](int a, int b, int z) -> const S& { return infect_tab.at(z).at(a).at(b); });
  return propagate(kernel, periods);
}

template <typename S>
LossSurface<S> multi_period_pmf(const ModelSpec& spec) {
  spec.validate();
  const auto mu = moment_sequence<S>(spec.direct, static_cast<std::size_t>(spec.n));
  const auto lambda = infection_moments<S>(spec.infection, spec.n);
  const auto xi = xi_table_general(spec.rule, lambda, spec.n);
  return multi_period_pmf(spec.n, spec.periods, mu, xi, spec.rule);
}

// Infection factor for i.i.d. Y with f = 1_{x>=1}:
// (1-(1-q)^z)^a (1-q)^{zb}, tabulated for a, b, z in 0..n.
template <typename S>
class IidInfection {
 public:
  IidInfection(int n, const S& q) {
    const S one(1);
    hit_.resize(static_cast<std::size_t>(n) + 1);
    miss_.resize(static_cast<std::size_t>(n) + 1);
    S escape(1);
    for (int z = 0; z <= n; ++z) {
      hit_[z].resize(static_cast<std::size_t>(n) + 1);
      miss_[z].resize(static_cast<std::size_t>(n) + 1);
      hit_[z][0] = miss_[z][0] = one;
      const S infected = one - escape;
      for (int i = 1; i <= n; ++i) {
        hit_[z][i] = hit_[z][i - 1] * infected;
        miss_[z][i] = miss_[z][i - 1] * escape;
      }
      escape *= (one - q);
    }
  }

  S operator()(int a, int b, int z) const { return S(hit_[z][a] * miss_[z][b]); }

 private:
  std::vector<std::vector<S>> hit_;
  std::vector<std::vector<S>> miss_;
};

// Closed form for i.i.d. X (p) and Y (q) with f = 1_{x>=1}; every term is
// nonnegative, so it is stable in floating point for large n.
template <typename S>
TransitionKernel<S> iid_kernel(int n, const S& p, const S& q, const InfectionRule& rule) {
  if (!rule.is_single_contact(n))
    throw DomainError("i.i.d. closed form requires f = 1_{x>=1}");
  const S one(1);
  std::vector<S> p_pow(static_cast<std::size_t>(n) + 1), pbar_pow(static_cast<std::size_t>(n) + 1);
  p_pow[0] = pbar_pow[0] = one;
  for (int i = 1; i <= n; ++i) {
    p_pow[i] = p_pow[i - 1] * p;
    pbar_pow[i] = pbar_pow[i - 1] * (one - p);
  }
  const IidInfection<S> infect(n, q);
  return assemble_kernel<S>(
      n, rule, [&](int gamma, int m) { return S(p_pow[gamma] * pbar_pow[m]); }, infect);
}

template <typename S>
LossSurface<S> multi_period_pmf_iid(int n, int periods, const S& p, const S& q,
                                    const InfectionRule& rule) {
  if (n < 1 || periods < 1) throw DomainError("need n >= 1 and T >= 1");
  if (p < 0 || p > 1 || q < 0 || q > 1) throw DomainError("p and q must lie in [0,1]");
  return propagate(iid_kernel<S>(n, p, q, rule), periods);
}

template <typename S>
LossSurface<S> multi_period_pmf_iid(const ModelSpec& spec) {
  spec.validate();
  if (!spec.is_iid()) throw DomainError("i.i.d. path requires sigma_X = sigma_Y = 0");
  return multi_period_pmf_iid<S>(spec.n, spec.periods, from_rational<S>(spec.direct.mean()),
                                 from_rational<S>(spec.infection.mean()), spec.rule);
}

// Joint law of one period's direct-default vector through
// rho(A, B) = P[X^i = 1 on A and X^i = 0 on B]; subsets are bitmasks.
template <typename S>
class HeterogeneousLaw {
 public:
  using Evaluator = std::function<S(std::uint32_t ones, std::uint32_t zeros)>;

  HeterogeneousLaw(int n, Evaluator rho)
      : n_(n), rho_(std::move(rho)), cache_(std::make_shared<Cache>()) {
    if (n < 1 || n > 30) throw DomainError("heterogeneous law needs 1 <= n <= 30");
  }

  // Exchangeable law from mu: rho(A,B) = sum_a C(|B|,a) (-1)^a mu_{|A|+a}.
  static HeterogeneousLaw exchangeable(int n, MomentSequence<S> mu) {
    mu.require_order(static_cast<std::size_t>(n));
    return HeterogeneousLaw(n, [mu = std::move(mu)](std::uint32_t a, std::uint32_t b) {
      const int ones = std::popcount(a);
      const int zeros = std::popcount(b);
      S acc(0);
      for (int j = 0; j <= zeros; ++j) {
        S term = binomial<S>(zeros, j) * mu[ones + j];
        if (j % 2) acc -= term;
        else acc += term;
      }
      return acc;
    });
  }

  static HeterogeneousLaw independent(std::vector<S> probs) {
    const int n = static_cast<int>(probs.size());
    return HeterogeneousLaw(n, [probs = std::move(probs)](std::uint32_t a, std::uint32_t b) {
      S acc(1);
      for (std::size_t i = 0; i < probs.size(); ++i) {
        if (a >> i & 1U) acc *= probs[i];
        else if (b >> i & 1U) acc *= S(S(1) - probs[i]);
      }
      return acc;
    });
  }

  // joint[mask] = P[X = mask] for all 2^n outcomes.
  static HeterogeneousLaw from_joint(int n, std::vector<S> joint) {
    if (joint.size() != (std::size_t{1} << n)) throw DomainError("joint table must have 2^n entries");
    return HeterogeneousLaw(n, [joint = std::move(joint)](std::uint32_t a, std::uint32_t b) {
      S acc(0);
      for (std::uint32_t m = 0; m < joint.size(); ++m)
        if ((m & a) == a && (m & b) == 0) acc += joint[m];
      return acc;
    });
  }

  int n() const { return n_; }

  // Memoized; not safe for concurrent calls on copies sharing a cache.
  const S& rho(std::uint32_t ones, std::uint32_t zeros) const {
    const std::uint64_t key = (static_cast<std::uint64_t>(ones) << 32) | zeros;
    auto it = cache_->find(key);
    if (it != cache_->end()) return it->second;
    return cache_->emplace(key, rho_(ones, zeros)).first->second;
  }

  // mu_k(Omega): average over k-subsets of P[all ones].
  MomentSequence<S> averaged_coefficients() const {
    MomentSequence<S> mu;
    mu.values.assign(static_cast<std::size_t>(n_) + 1, S(0));
    const std::uint32_t full = (n_ == 32) ? ~0U : ((1U << n_) - 1U);
    for (std::uint32_t a = 0; a <= full; ++a) mu.values[std::popcount(a)] += rho(a, 0);
    for (int k = 0; k <= n_; ++k) mu.values[k] /= binomial<S>(n_, k);
    return mu;
  }

 private:
  using Cache = std::unordered_map<std::uint64_t, S>;
  int n_;
  Evaluator rho_;
  std::shared_ptr<Cache> cache_;
};

inline constexpr int kMaxSubsetFirms = 14;

// Law of N_t by enumerating default sets theta_{t-1} within theta_t and the
// direct-default sets M inside theta_t - theta_{t-1}.
template <typename S>
LossSurface<S> general_subset_pmf(const HeterogeneousLaw<S>& law, const XiTable<S>& xi,
                                  const InfectionRule& rule, int periods) {
  const int n = law.n();
  if (n > kMaxSubsetFirms)
    throw SizeLimitExceeded("subset enumeration limited to n <= " + std::to_string(kMaxSubsetFirms));
  if (periods < 1) throw DomainError("T must be at least 1");
  if (xi.n() < n) throw InsufficientOrder("xi table smaller than n");
  const std::uint32_t full = (1U << n) - 1U;
  BinomialTable<S> c(n);

  // survivors_term[z][a][b] = sum_j C(b,j) (-1)^j xi_{j+a}(z)
  std::unordered_map<std::uint64_t, S> infect_cache;
  auto infect = [&](int a, int b, int z) -> const S& {
    const std::uint64_t key = (static_cast<std::uint64_t>(z) << 40) |
                              (static_cast<std::uint64_t>(a) << 20) | static_cast<std::uint64_t>(b);
    auto it = infect_cache.find(key);
    if (it != infect_cache.end()) return it->second;
    S acc(0);
    for (int j = 0; j <= b; ++j) {
      S term = c(b, j) * xi(j + a, z);
      if (j % 2) acc -= term;
      else acc += term;
    }
    return infect_cache.emplace(key, acc).first->second;
  };

  std::vector<S> prev(static_cast<std::size_t>(full) + 1, S(0));
  prev[0] = S(1);
  LossSurface<S> surface;
  surface.n = n;
  auto collapse = [&](const std::vector<S>& by_set) {
    std::vector<S> row(static_cast<std::size_t>(n) + 1, S(0));
    for (std::uint32_t s = 0; s <= full; ++s) row[std::popcount(s)] += by_set[s];
    return row;
  };
  surface.rows.push_back(collapse(prev));

  for (int t = 1; t <= periods; ++t) {
    std::vector<S> next(static_cast<std::size_t>(full) + 1, S(0));
    for (std::uint32_t before = 0; before <= full; ++before) {
      if (prev[before] == 0) continue;
      const int u = std::popcount(before);
      const std::uint32_t alive = full & ~before;
      // theta_t = before | fresh, fresh ranging over subsets of the survivors
      for (std::uint32_t fresh = alive;; fresh = (fresh - 1) & alive) {
        const int r = u + std::popcount(fresh);
        S trans(0);
        for (std::uint32_t direct = fresh;; direct = (direct - 1) & fresh) {
          const int m = std::popcount(direct);
          const S& rho = law.rho(direct, alive & ~direct);
          if (rho != 0) trans += rho * infect(r - u - m, n - r, rule.g(u, m));
          if (direct == 0) break;
        }
        next[before | fresh] += trans * prev[before];
        if (fresh == 0) break;
      }
    }
    prev = std::move(next);
    surface.rows.push_back(collapse(prev));
  }
  return surface;
}

template <typename S>
struct PeriodStats {
  S mean{0};
  S variance{0};
  std::vector<S> survival;  // survival[k] = P[N_t >= k], k = 0..n
  S p_all{0};               // P[N_t = n]
};

template <typename S>
std::vector<PeriodStats<S>> surface_stats(const LossSurface<S>& surface) {
  std::vector<PeriodStats<S>> out;
  const int n = surface.n;
  for (const auto& row : surface.rows) {
    PeriodStats<S> st;
    S m1(0), m2(0);
    for (int r = 0; r <= n; ++r) {
      m1 += S(r) * row[r];
      m2 += S(r) * S(r) * row[r];
    }
    st.mean = m1;
    st.variance = m2 - m1 * m1;
    st.survival.assign(static_cast<std::size_t>(n) + 2, S(0));
    for (int k = n; k >= 0; --k) st.survival[k] = st.survival[k + 1] + row[k];
    st.survival.pop_back();
    st.p_all = row[n];
    out.push_back(std::move(st));
  }
  return out;
}

}  // namespace contagion
