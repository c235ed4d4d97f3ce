#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "contagion/error.hpp"
#include "contagion/loss_engine.hpp"
#include "contagion/quadrature.hpp"

namespace contagion {

struct SimConfig {
  ModelSpec spec;
  std::int64_t paths = 100000;
  std::uint64_t seed = 20240601;
  MixingMode mixing = MixingMode::redraw_per_period;
  int threads = 0;  // 0: hardware concurrency
};

// counts[t][r] = number of paths with N_t = r.
struct EmpiricalSurface {
  int n = 0;
  std::int64_t paths = 0;
  std::vector<std::vector<std::int64_t>> counts;

  friend bool operator==(const EmpiricalSurface&, const EmpiricalSurface&) = default;
};

struct PathRecord {
  std::int64_t path;
  int t;
  int defaults;         // N_t
  int direct_defaults;  // N_t^D
};

using PathObserver = std::function<void(const PathRecord&)>;

// Paths are split into this many fixed blocks, each with its own stream, so
// results do not depend on the worker count.
inline constexpr int kSimPartitions = 64;

namespace detail {

class PathSimulator {
 public:
  PathSimulator(const SimConfig& config, int partition)
      : config_(config), n_(config.spec.n) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(partition), 0x5eedU};
    rng_.seed(seq);
    direct_ = make_sampler(config.spec.direct);
    infect_ = make_sampler(config.spec.infection);
    defaulted_.assign(static_cast<std::size_t>(n_), 0);
  }

  // Simulates one path; counts[t][N_t] incremented for t = 0..T.
  void run(std::int64_t path_index, std::vector<std::vector<std::int64_t>>& counts,
           const PathObserver& observer) {
    const auto& spec = config_.spec;
    std::fill(defaulted_.begin(), defaulted_.end(), 0);
    int total = 0;
    counts[0][0] += 1;
    double theta_x = 0.0, theta_y = 0.0;
    for (int t = 1; t <= spec.periods; ++t) {
      if (t == 1 || config_.mixing == MixingMode::redraw_per_period) {
        theta_x = draw(direct_);
        theta_y = draw(infect_);
      }
      fresh_.clear();
      survivors_.clear();
      previous_.clear();
      for (int i = 0; i < n_; ++i) {
        if (defaulted_[i]) {
          previous_.push_back(i);
        } else if (uniform() < theta_x) {
          fresh_.push_back(i);
        } else {
          survivors_.push_back(i);
        }
      }
      const int u = total;
      const int l = static_cast<int>(fresh_.size());
      const int z = spec.rule.g(u, l);
      infectors_.clear();
      if (z >= l) {
        infectors_ = fresh_;
        pick(previous_, z - l, infectors_);
      } else {
        pick(fresh_, z, infectors_);
      }
      infected_.clear();
      for (int i : survivors_)
        if (is_infected(static_cast<int>(infectors_.size()), theta_y)) infected_.push_back(i);
      for (int i : fresh_) defaulted_[i] = 1;
      for (int i : infected_) defaulted_[i] = 1;
      total += l + static_cast<int>(infected_.size());
      counts[t][total] += 1;
      if (observer) observer(PathRecord{path_index, t, total, l});
    }
  }

 private:
  struct Sampler {
    bool dirac = true;
    double mean = 0.0;
    std::gamma_distribution<double> left;
    std::gamma_distribution<double> right;
  };

  static Sampler make_sampler(const MixingLaw& law) {
    Sampler s;
    s.mean = law.mean_d();
    s.dirac = law.is_dirac();
    if (!s.dirac) {
      const auto shape = beta_params<double>(law);
      s.left = std::gamma_distribution<double>(shape.alpha, 1.0);
      s.right = std::gamma_distribution<double>(shape.beta, 1.0);
    }
    return s;
  }

  double draw(Sampler& s) {
    if (s.dirac) return s.mean;
    for (;;) {
      const double a = s.left(rng_);
      const double b = s.right(rng_);
      if (a + b > 0.0) return a / (a + b);
    }
  }

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  // Appends `count` members of `pool` chosen uniformly without replacement.
  void pick(std::vector<int> pool, int count, std::vector<int>& out) {
    const int size = static_cast<int>(pool.size());
    for (int i = 0; i < count && i < size; ++i) {
      std::uniform_int_distribution<int> idx(i, size - 1);
      std::swap(pool[i], pool[idx(rng_)]);
      out.push_back(pool[i]);
    }
  }

  // Draws Y^{ji} from each infector lazily and applies f to the contact count.
  bool is_infected(int infectors, double theta_y) {
    const auto& rule = config_.spec.rule;
    if (const auto& theta = rule.threshold_form()) {
      int hits = 0;
      for (int j = 0; j < infectors; ++j) {
        if (hits >= *theta || hits + (infectors - j) < *theta) break;
        if (uniform() < theta_y) ++hits;
      }
      return hits >= *theta;
    }
    int hits = 0;
    for (int j = 0; j < infectors; ++j)
      if (uniform() < theta_y) ++hits;
    return rule.f(hits);
  }

  const SimConfig& config_;
  int n_;
  std::mt19937_64 rng_;
  Sampler direct_;
  Sampler infect_;
  std::vector<std::uint8_t> defaulted_;
  std::vector<int> fresh_, survivors_, previous_, infectors_, infected_;
};

}  // namespace detail

// Monte Carlo of the raw default dynamics. Deterministic for a given config;
// an observer forces single-threaded execution so records arrive in order.
inline EmpiricalSurface simulate(const SimConfig& config, const PathObserver& observer = {}) {
  config.spec.validate();
  if (config.paths < 1) throw DomainError("paths must be at least 1");
  const int n = config.spec.n;
  const int periods = config.spec.periods;
  auto blank = [&] {
    return std::vector<std::vector<std::int64_t>>(
        static_cast<std::size_t>(periods) + 1, std::vector<std::int64_t>(static_cast<std::size_t>(n) + 1, 0));
  };
  std::vector<std::vector<std::vector<std::int64_t>>> partial(kSimPartitions, blank());

  auto run_partition = [&](int part) {
    const std::int64_t begin = config.paths * part / kSimPartitions;
    const std::int64_t end = config.paths * (part + 1) / kSimPartitions;
    detail::PathSimulator sim(config, part);
    for (std::int64_t p = begin; p < end; ++p) sim.run(p, partial[part], observer);
  };

  int workers = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  if (observer) workers = 1;
  workers = std::min(workers, kSimPartitions);
  if (workers == 1) {
    for (int part = 0; part < kSimPartitions; ++part) run_partition(part);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int part = w; part < kSimPartitions; part += workers) run_partition(part);
      });
    for (auto& th : pool) th.join();
  }

  EmpiricalSurface out;
  out.n = n;
  out.paths = config.paths;
  out.counts = blank();
  for (const auto& block : partial)
    for (int t = 0; t <= periods; ++t)
      for (int r = 0; r <= n; ++r) out.counts[t][r] += block[t][r];
  return out;
}

struct EmpiricalPeriodStats {
  double mean = 0.0;
  double variance = 0.0;           // unbiased
  std::vector<double> frequency;   // P^[N_t = r]
  std::vector<double> frequency_se;
  std::vector<double> tail;        // P^[N_t >= k]
  std::vector<double> tail_se;
};

inline double proportion_se(double p, std::int64_t paths) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(paths));
}

inline std::vector<EmpiricalPeriodStats> empirical_stats(const EmpiricalSurface& surface) {
  if (surface.paths < 2) throw DomainError("empirical statistics need at least 2 paths");
  const double paths = static_cast<double>(surface.paths);
  std::vector<EmpiricalPeriodStats> out;
  for (const auto& row : surface.counts) {
    EmpiricalPeriodStats st;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < row.size(); ++r) {
      s1 += static_cast<double>(r) * static_cast<double>(row[r]);
      s2 += static_cast<double>(r) * static_cast<double>(r) * static_cast<double>(row[r]);
    }
    st.mean = s1 / paths;
    st.variance = std::max(0.0, (s2 - s1 * s1 / paths) / (paths - 1.0));
    std::int64_t above = 0;
    st.tail.assign(row.size(), 0.0);
    st.tail_se.assign(row.size(), 0.0);
    for (std::size_t r = row.size(); r-- > 0;) {
      above += row[r];
      st.tail[r] = static_cast<double>(above) / paths;
      st.tail_se[r] = proportion_se(st.tail[r], surface.paths);
    }
    for (auto c : row) {
      const double f = static_cast<double>(c) / paths;
      st.frequency.push_back(f);
      st.frequency_se.push_back(proportion_se(f, surface.paths));
    }
    out.push_back(std::move(st));
  }
  return out;
}

struct BandComparison {
  int cells = 0;
  int failures = 0;
  double worst_z = 0.0;  // largest |freq - exact| / se over cells with se > 0
};

// Counts cells where |freq - exact| > width * sqrt(exact (1-exact) / paths) + slack.
inline BandComparison compare_to_exact(const LossSurface<double>& exact,
                                       const EmpiricalSurface& empirical, double width,
                                       double slack = 0.0) {
  if (exact.n != empirical.n || exact.rows.size() != empirical.counts.size())
    throw DomainError("surface shapes differ");
  BandComparison cmp;
  const double paths = static_cast<double>(empirical.paths);
  for (std::size_t t = 1; t < exact.rows.size(); ++t) {
    for (std::size_t r = 0; r < exact.rows[t].size(); ++r) {
      const double p = exact.rows[t][r];
      const double freq = static_cast<double>(empirical.counts[t][r]) / paths;
      const double se = proportion_se(p, empirical.paths);
      const double dev = std::abs(freq - p);
      ++cmp.cells;
      if (dev > width * se + slack) ++cmp.failures;
      if (se > 0.0) cmp.worst_z = std::max(cmp.worst_z, dev / se);
    }
  }
  return cmp;
}

}  // namespace contagion
