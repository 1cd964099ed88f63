// tests/oracles.hpp
//
// Test-only reference implementations, kept independent of the library code
// paths they check: quadrature for PLDA marginals, exhaustive DTW and EER
// sweeps, direct filter recursions, and a naive DFT.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace oracles {

// --- Gauss-Hermite quadrature (Golub-Welsch) -------------------------------

struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;  // for integrals against exp(-x^2)
};

inline GaussHermite GaussHermiteRule(int n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double off = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  GaussHermite rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double sqrt_pi = std::sqrt(3.14159265358979323846);
  for (int i = 0; i < n; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = sqrt_pi * v0 * v0;
  }
  return rule;
}

inline double LogGaussian(const Eigen::VectorXd &x, const Eigen::VectorXd &mean,
                          const Eigen::MatrixXd &cov) {
  const Eigen::Index d = x.size();
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const Eigen::VectorXd diff = x - mean;
  return -0.5 * (d * std::log(2.0 * 3.14159265358979323846) + logdet +
                 diff.dot(llt.solve(diff)));
}

// log integral_y N(y; mu, B) prod_i N(obs_i; y, W) dy by tensor-product
// Gauss-Hermite quadrature with the substitution y = mu + sqrt(2) L_B z.
inline double LogMarginalByQuadrature(const std::vector<Eigen::VectorXd> &observations,
                                      const Eigen::VectorXd &mu, const Eigen::MatrixXd &between,
                                      const Eigen::MatrixXd &within, int nodes_per_dim) {
  const Eigen::Index d = mu.size();
  const GaussHermite rule = GaussHermiteRule(nodes_per_dim);
  const Eigen::MatrixXd l_b = Eigen::LLT<Eigen::MatrixXd>(between).matrixL();

  std::vector<int> index(static_cast<std::size_t>(d), 0);
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(std::pow(nodes_per_dim, d)));
  while (true) {
    Eigen::VectorXd z(d);
    double log_w = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      z(i) = rule.nodes[static_cast<std::size_t>(index[static_cast<std::size_t>(i)])];
      log_w += std::log(rule.weights[static_cast<std::size_t>(index[static_cast<std::size_t>(i)])]);
    }
    const Eigen::VectorXd y = mu + std::sqrt(2.0) * (l_b * z);
    double log_f = 0.0;
    for (const auto &obs : observations) log_f += LogGaussian(obs, y, within);
    const double term = log_w + log_f;
    log_terms.push_back(term);
    max_log = std::max(max_log, term);

    Eigen::Index pos = 0;
    while (pos < d) {
      if (++index[static_cast<std::size_t>(pos)] < nodes_per_dim) break;
      index[static_cast<std::size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == d) break;
  }
  double acc = 0.0;
  for (double t : log_terms) acc += std::exp(t - max_log);
  // the pi^{-d/2} factor absorbs the substitution Jacobian and N(y; mu, B)
  return max_log + std::log(acc) -
         0.5 * d * std::log(3.14159265358979323846);
}

inline double PldaLlrByQuadrature(const Eigen::VectorXd &enroll, const Eigen::VectorXd &test,
                                  const Eigen::VectorXd &mu, const Eigen::MatrixXd &between,
                                  const Eigen::MatrixXd &within, int nodes_per_dim = 48) {
  const double log_h0 =
      LogMarginalByQuadrature({enroll, test}, mu, between, within, nodes_per_dim);
  const double log_e = LogMarginalByQuadrature({enroll}, mu, between, within, nodes_per_dim);
  const double log_t = LogMarginalByQuadrature({test}, mu, between, within, nodes_per_dim);
  return log_h0 - log_e - log_t;
}

// --- exhaustive DTW ---------------------------------------------------------

inline void EnumeratePaths(const Eigen::MatrixXd &cost, int i, int j, double acc,
                           double *best) {
  acc += cost(i, j);
  if (acc >= *best) return;  // admissible prune: costs are non-negative
  if (i + 1 == cost.rows() && j + 1 == cost.cols()) {
    *best = acc;
    return;
  }
  if (i + 1 < cost.rows() && j + 1 < cost.cols()) EnumeratePaths(cost, i + 1, j + 1, acc, best);
  if (i + 1 < cost.rows()) EnumeratePaths(cost, i + 1, j, acc, best);
  if (j + 1 < cost.cols()) EnumeratePaths(cost, i, j + 1, acc, best);
}

inline double DtwByEnumeration(const Eigen::MatrixXd &cost) {
  double best = std::numeric_limits<double>::infinity();
  EnumeratePaths(cost, 0, 0, 0.0, &best);
  return best;
}

// --- brute-force EER sweep ---------------------------------------------------

struct SweepResult {
  double eer = 0.0;
  double threshold = 0.0;
};

inline SweepResult EerBySweep(const std::vector<double> &targets,
                              const std::vector<double> &nontargets) {
  auto far_at = [&](double th) {
    int c = 0;
    for (double s : nontargets) c += (s >= th);
    return static_cast<double>(c) / static_cast<double>(nontargets.size());
  };
  auto frr_at = [&](double th) {
    int c = 0;
    for (double s : targets) c += (s < th);
    return static_cast<double>(c) / static_cast<double>(targets.size());
  };
  std::vector<double> thresholds;
  for (double s : targets) thresholds.push_back(s);
  for (double s : nontargets) thresholds.push_back(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double hi = thresholds.front() + 1.0, lo = thresholds.back() - 1.0;
  thresholds.insert(thresholds.begin(), hi);
  thresholds.push_back(lo);

  double prev_th = thresholds[0], prev_far = far_at(prev_th), prev_frr = frr_at(prev_th);
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const double th = thresholds[i], far = far_at(th), frr = frr_at(th);
    const double d_prev = prev_frr - prev_far, d_cur = frr - far;
    if (d_cur <= 0.0) {
      SweepResult r;
      if (d_cur == 0.0) {
        r.eer = far;
        r.threshold = th;
      } else {
        const double t = d_prev / (d_prev - d_cur);
        r.eer = prev_far + t * (far - prev_far);
        r.threshold = prev_th + t * (th - prev_th);
      }
      return r;
    }
    prev_th = th;
    prev_far = far;
    prev_frr = frr;
  }
  return {};
}

// --- naive DFT ---------------------------------------------------------------

inline std::vector<double> DftMagnitude(const std::vector<double> &x) {
  const std::size_t n = x.size();
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * 3.14159265358979323846 * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    mag[k] = std::abs(acc);
  }
  return mag;
}

}  // namespace oracles
