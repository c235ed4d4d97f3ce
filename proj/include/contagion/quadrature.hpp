#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

#include "contagion/error.hpp"
#include "contagion/loss_engine.hpp"
#include "contagion/moments.hpp"

namespace contagion {

// Whether the hidden factor is redrawn every period or drawn once per path.
enum class MixingMode { redraw_per_period, shared_across_periods };

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1
};

// Gauss rule for the Beta(alpha, beta) law on [0,1] (Golub-Welsch on the
// Jacobi recurrence). Exact for polynomials of degree <= 2 * count - 1.
inline QuadratureRule gauss_beta_rule(double alpha, double beta, int count) {
  if (count < 1) throw DomainError("quadrature needs at least one node");
  if (!(alpha > 0.0 && beta > 0.0)) throw DomainError("Beta shape parameters must be positive");
  // Jacobi weight (1-x)^a (1+x)^b on [-1,1], mapped by theta = (1+x)/2.
  const double a = beta - 1.0;
  const double b = alpha - 1.0;
  const double c = a + b;
  Eigen::VectorXd diag(count);
  Eigen::VectorXd sub(count > 1 ? count - 1 : 1);
  diag(0) = alpha / (alpha + beta);
  for (int k = 1; k < count; ++k) {
    const double s = 2.0 * k + c;
    diag(k) = (2.0 * k * k + 2.0 * k * (c + 1.0) + c * (b + 1.0)) / (s * (s + 2.0));
  }
  for (int k = 1; k < count; ++k) {
    const double s = 2.0 * k + c;
    double b_k;
    if (k == 1) {
      b_k = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + c) * (2.0 + c) * (3.0 + c));
    } else {
      b_k = 4.0 * k * (k + a) * (k + b) * (k + c) / (s * s * (s + 1.0) * (s - 1.0));
    }
    sub(k - 1) = 0.5 * std::sqrt(b_k);
  }
  QuadratureRule rule;
  if (count == 1) {
    rule.nodes = {diag(0)};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub.head(count - 1), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error("Golub-Welsch eigen solve failed");
  rule.nodes.resize(count);
  rule.weights.resize(count);
  double total = 0.0;
  for (int i = 0; i < count; ++i) {
    rule.nodes[i] = std::clamp(solver.eigenvalues()(i), 0.0, 1.0);
    const double v = solver.eigenvectors()(0, i);
    rule.weights[i] = v * v;
    total += rule.weights[i];
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

// Quadrature over a mixing law; a Dirac law yields its single atom.
inline QuadratureRule mixing_rule(const MixingLaw& law, int count) {
  if (count < 1) throw DomainError("quadrature needs at least one node");
  if (law.is_dirac()) return {{law.mean_d()}, {1.0}};
  const auto shape = beta_params<double>(law);
  return gauss_beta_rule(shape.alpha, shape.beta, count);
}

struct QuadratureSettings {
  int nodes = 64;
  MixingMode mode = MixingMode::redraw_per_period;
};

// Loss surface for Beta-mixed direct defaults and i.i.d. infections
// (sigma_Y = 0, f = 1_{x>=1}) in floating point: the conditional i.i.d.
// kernel is integrated against the direct-default factor.
inline LossSurface<double> mixed_quadrature_pmf(const ModelSpec& spec,
                                                const QuadratureSettings& settings = {}) {
  spec.validate();
  if (!spec.infection.is_dirac())
    throw DomainError("quadrature path requires sigma_Y = 0");
  if (!spec.rule.is_single_contact(spec.n))
    throw DomainError("quadrature path requires f = 1_{x>=1}");
  if (settings.nodes < 1 || settings.nodes > 1024)
    throw DomainError("quadrature node count must lie in 1..1024");
  const int n = spec.n;
  const double q = spec.infection.mean_d();
  const QuadratureRule rule = mixing_rule(spec.direct, settings.nodes);

  if (settings.mode == MixingMode::shared_across_periods) {
    LossSurface<double> mixed;
    mixed.n = n;
    mixed.rows.assign(static_cast<std::size_t>(spec.periods) + 1,
                      std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0));
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const auto path = propagate(iid_kernel<double>(n, rule.nodes[i], q, spec.rule), spec.periods);
      for (int t = 0; t <= spec.periods; ++t)
        for (int r = 0; r <= n; ++r) mixed.rows[t][r] += rule.weights[i] * path.rows[t][r];
    }
    return mixed;
  }

  // direct[gamma][m] = E[theta^gamma (1-theta)^m]
  std::vector<std::vector<double>> direct(static_cast<std::size_t>(n) + 1);
  for (int gamma = 0; gamma <= n; ++gamma) direct[gamma].assign(static_cast<std::size_t>(n - gamma) + 1, 0.0);
  std::vector<double> up(static_cast<std::size_t>(n) + 1), down(static_cast<std::size_t>(n) + 1);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double theta = rule.nodes[i];
    up[0] = down[0] = 1.0;
    for (int j = 1; j <= n; ++j) {
      up[j] = up[j - 1] * theta;
      down[j] = down[j - 1] * (1.0 - theta);
    }
    for (int gamma = 0; gamma <= n; ++gamma) {
      const double wg = rule.weights[i] * up[gamma];
      for (int m = 0; gamma + m <= n; ++m) direct[gamma][m] += wg * down[m];
    }
  }
  const IidInfection<double> infect(n, q);
  const auto kernel = assemble_kernel<double>(
      n, spec.rule, [&](int gamma, int m) { return direct[gamma][m]; }, infect);
  return propagate(kernel, spec.periods);
}

// Largest absolute cell difference between two surfaces of equal shape.
inline double max_abs_difference(const LossSurface<double>& a, const LossSurface<double>& b) {
  if (a.n != b.n || a.rows.size() != b.rows.size()) throw DomainError("surface shapes differ");
  double worst = 0.0;
  for (std::size_t t = 0; t < a.rows.size(); ++t)
    for (std::size_t r = 0; r < a.rows[t].size(); ++r)
      worst = std::max(worst, std::abs(a.rows[t][r] - b.rows[t][r]));
  return worst;
}

// Compares the quadrature path with the exact rational engine (small n only);
// throws CrossCheckFailure beyond tolerance, returns the max error otherwise.
inline double validate_quadrature(const ModelSpec& spec, const QuadratureSettings& settings,
                                  double tolerance) {
  if (spec.n > 30) throw SizeLimitExceeded("exact validation limited to n <= 30");
  if (settings.mode != MixingMode::redraw_per_period)
    throw DomainError("exact engine covers the redraw-per-period mode only");
  const auto exact = multi_period_pmf<Rational>(spec).to_double();
  const auto approx = mixed_quadrature_pmf(spec, settings);
  const double err = max_abs_difference(exact, approx);
  if (!(err <= tolerance))
    throw CrossCheckFailure("quadrature vs exact surface: max error " + std::to_string(err) +
                            " exceeds " + std::to_string(tolerance));
  return err;
}

}  // namespace contagion
