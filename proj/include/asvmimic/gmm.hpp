// asvmimic/gmm.hpp

// Copyright 2026  The ASVMimic Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asvmimic/common.hpp"
#include "asvmimic/frontend.hpp"
#include "asvmimic/serial.hpp"
#include "asvmimic/store.hpp"

namespace asvmimic {

// Diagonal-covariance Gaussian mixture (universal background model).
struct GmmUbm {
  Eigen::VectorXd weights;    // C, sums to 1
  Eigen::MatrixXd means;      // C x D
  Eigen::MatrixXd variances;  // C x D, floored

  Eigen::Index NumComponents() const { return weights.size(); }
  Eigen::Index Dim() const { return means.cols(); }
};

// Zeroth and centered first-order Baum-Welch statistics.
struct BwStats {
  Eigen::VectorXd n;  // C, occupancies
  Eigen::MatrixXd f;  // C x D, sum_t gamma_t(c) (x_t - m_c)

  Eigen::Index NumComponents() const { return n.size(); }
  Eigen::Index Dim() const { return f.cols(); }
};

// Shard merge: associative and commutative, so statistics accumulated by
// parallel workers can be reduced in any grouping.
inline BwStats MergeBwStats(const BwStats &a, const BwStats &b) {
  if (a.n.size() != b.n.size() || a.f.cols() != b.f.cols())
    throw DataError("merge_bw: shape mismatch");
  BwStats out;
  out.n = a.n + b.n;
  out.f = a.f + b.f;
  return out;
}

namespace gmm_detail {

// Per-frame responsibilities and total log-likelihood for the speech frames
// of one utterance.  Log-domain throughout.
struct EStepResult {
  Eigen::VectorXd n;
  Eigen::MatrixXd sum_x;     // C x D: sum_t gamma x
  Eigen::MatrixXd sum_xx;    // C x D: sum_t gamma x^2
  double log_likelihood = 0.0;
  std::int64_t frames = 0;
};

inline EStepResult AccumulateEStep(const FeatureMatrix &feat, const GmmUbm &gmm,
                                   bool want_second_order) {
  const Eigen::Index c_count = gmm.NumComponents(), d = gmm.Dim();
  if (feat.Dim() != d) throw DataError("gmm e-step: feature dimension mismatch");
  EStepResult r;
  r.n = Eigen::VectorXd::Zero(c_count);
  r.sum_x = Eigen::MatrixXd::Zero(c_count, d);
  if (want_second_order) r.sum_xx = Eigen::MatrixXd::Zero(c_count, d);

  // log N(x; m, v) = const_c - 0.5 sum_j (x_j - m_j)^2 / v_j
  Eigen::VectorXd log_const(c_count);
  Eigen::MatrixXd inv_var = gmm.variances.cwiseInverse();
  for (Eigen::Index c = 0; c < c_count; ++c) {
    double s = -0.5 * d * std::log(2.0 * kPi);
    for (Eigen::Index j = 0; j < d; ++j) s -= 0.5 * std::log(gmm.variances(c, j));
    log_const(c) = s + std::log(std::max(gmm.weights(c), 1e-300));
  }

  Eigen::VectorXd logp(c_count);
  for (Eigen::Index t = 0; t < feat.NumFrames(); ++t) {
    if (!feat.speech_flags[static_cast<std::size_t>(t)]) continue;
    const Eigen::RowVectorXd x = feat.frames.row(t);
    for (Eigen::Index c = 0; c < c_count; ++c) {
      const Eigen::RowVectorXd diff = x - gmm.means.row(c);
      logp(c) = log_const(c) - 0.5 * diff.cwiseProduct(diff).cwiseProduct(inv_var.row(c)).sum();
    }
    const double max_lp = logp.maxCoeff();
    const double lse = max_lp + std::log((logp.array() - max_lp).exp().sum());
    if (!std::isfinite(lse)) throw NumericError("gmm e-step: non-finite likelihood");
    r.log_likelihood += lse;
    ++r.frames;
    for (Eigen::Index c = 0; c < c_count; ++c) {
      const double gamma = std::exp(logp(c) - lse);
      r.n(c) += gamma;
      r.sum_x.row(c) += gamma * x;
      if (want_second_order) r.sum_xx.row(c) += gamma * x.cwiseProduct(x);
    }
  }
  return r;
}

}  // namespace gmm_detail

struct UbmTrainOptions {
  int num_components = 256;
  int em_iterations = 5;        // per split level and after the final split
  unsigned long long seed = 0;  // reserved; training is split-deterministic
  double variance_floor_fraction = 1e-3;
  // Called once per EM iteration with (components, iteration, loglik/frame).
  std::function<void(int, int, double)> progress;
};

/**
   UBM training: a global Gaussian is split in two repeatedly (mean +/- 0.1
   sigma) until the requested component count is reached, with a few EM
   iterations after every split.  Variances are floored at a fraction of the
   global variance.  The data log-likelihood is non-decreasing within each
   split level (checked by the tests).
*/
inline GmmUbm TrainUbm(const std::vector<FeatureMatrix> &features,
                       const UbmTrainOptions &opts = {}) {
  if (features.empty()) throw DataError("train_ubm: no features");
  const Eigen::Index d = features.front().Dim();

  // global Gaussian
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  std::int64_t n_frames = 0;
  for (const auto &feat : features) {
    if (feat.Dim() != d) throw DataError("train_ubm: inconsistent feature dims");
    for (Eigen::Index t = 0; t < feat.NumFrames(); ++t) {
      if (!feat.speech_flags[static_cast<std::size_t>(t)]) continue;
      mean += feat.frames.row(t).transpose();
      sq += feat.frames.row(t).transpose().cwiseProduct(feat.frames.row(t).transpose());
      ++n_frames;
    }
  }
  if (n_frames < 50 * static_cast<std::int64_t>(opts.num_components))
    throw DataError("train_ubm: need at least 50 speech frames per component, got " +
                    std::to_string(n_frames));
  mean /= static_cast<double>(n_frames);
  Eigen::VectorXd global_var = sq / static_cast<double>(n_frames) - mean.cwiseProduct(mean);
  Eigen::VectorXd floor = (opts.variance_floor_fraction * global_var).cwiseMax(1e-10);

  GmmUbm gmm;
  gmm.weights = Eigen::VectorXd::Ones(1);
  gmm.means = mean.transpose();
  gmm.variances = global_var.cwiseMax(floor).transpose();

  auto run_em = [&](int iterations) {
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < iterations; ++it) {
      const Eigen::Index c_count = gmm.NumComponents();
      Eigen::VectorXd acc_n = Eigen::VectorXd::Zero(c_count);
      Eigen::MatrixXd acc_x = Eigen::MatrixXd::Zero(c_count, d);
      Eigen::MatrixXd acc_xx = Eigen::MatrixXd::Zero(c_count, d);
      double ll = 0.0;
      // fixed utterance order keeps the reduction deterministic
      for (const auto &feat : features) {
        auto r = gmm_detail::AccumulateEStep(feat, gmm, true);
        acc_n += r.n;
        acc_x += r.sum_x;
        acc_xx += r.sum_xx;
        ll += r.log_likelihood;
      }
      if (!std::isfinite(ll)) throw NumericError("train_ubm: non-finite likelihood");
      if (opts.progress)
        opts.progress(static_cast<int>(c_count), it, ll / static_cast<double>(n_frames));
      for (Eigen::Index c = 0; c < c_count; ++c) {
        if (acc_n(c) < 1e-8) continue;  // starved component keeps its parameters
        gmm.weights(c) = acc_n(c) / static_cast<double>(n_frames);
        gmm.means.row(c) = acc_x.row(c) / acc_n(c);
        Eigen::RowVectorXd var =
            acc_xx.row(c) / acc_n(c) - gmm.means.row(c).cwiseProduct(gmm.means.row(c));
        gmm.variances.row(c) = var.cwiseMax(floor.transpose());
      }
      gmm.weights /= gmm.weights.sum();
      prev_ll = ll;
    }
    return prev_ll;
  };

  run_em(opts.em_iterations);
  while (gmm.NumComponents() < opts.num_components) {
    const Eigen::Index c_count = gmm.NumComponents();
    const Eigen::Index n_new =
        std::min<Eigen::Index>(c_count, opts.num_components - c_count);
    // split the heaviest components, ties resolved by index
    std::vector<Eigen::Index> order(static_cast<std::size_t>(c_count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return gmm.weights(a) > gmm.weights(b);
    });
    GmmUbm next;
    next.weights.resize(c_count + n_new);
    next.means.resize(c_count + n_new, d);
    next.variances.resize(c_count + n_new, d);
    next.weights.head(c_count) = gmm.weights;
    next.means.topRows(c_count) = gmm.means;
    next.variances.topRows(c_count) = gmm.variances;
    for (Eigen::Index i = 0; i < n_new; ++i) {
      const Eigen::Index src = order[static_cast<std::size_t>(i)];
      const Eigen::RowVectorXd sigma = gmm.variances.row(src).cwiseSqrt();
      next.weights(src) = gmm.weights(src) / 2.0;
      next.weights(c_count + i) = gmm.weights(src) / 2.0;
      next.means.row(c_count + i) = gmm.means.row(src) + 0.1 * sigma;
      next.means.row(src) = gmm.means.row(src) - 0.1 * sigma;
      next.variances.row(c_count + i) = gmm.variances.row(src);
    }
    gmm = std::move(next);
    run_em(opts.em_iterations);
  }
  return gmm;
}

// Per-utterance Baum-Welch statistics against the UBM, speech frames only.
inline BwStats AccumulateBw(const FeatureMatrix &feat, const GmmUbm &ubm) {
  if (feat.CountSpeechFrames() == 0)
    throw DataError("accumulate_bw: utterance has no speech frames");
  auto r = gmm_detail::AccumulateEStep(feat, ubm, false);
  BwStats stats;
  stats.n = r.n;
  stats.f = r.sum_x - r.n.asDiagonal() * ubm.means;
  return stats;
}

template <>
struct ArtifactTraits<GmmUbm> {
  static constexpr std::uint32_t kTypeTag = 0x474d4d01;  // "GMM",1
  static constexpr std::uint32_t kVersion = 1;
  static void Serialize(BlobWriter &w, const GmmUbm &g) {
    w.WriteVector(g.weights);
    w.WriteMatrix(g.means);
    w.WriteMatrix(g.variances);
  }
  static GmmUbm Deserialize(BlobReader &r) {
    GmmUbm g;
    g.weights = r.ReadVector();
    g.means = r.ReadMatrix();
    g.variances = r.ReadMatrix();
    return g;
  }
};

}  // namespace asvmimic
