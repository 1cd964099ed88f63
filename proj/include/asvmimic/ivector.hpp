// asvmimic/ivector.hpp

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
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "asvmimic/common.hpp"
#include "asvmimic/gmm.hpp"

namespace asvmimic {

// Total-variability subspace: supervector offset = T w, w ~ N(0, I_R).
struct TotalVariability {
  Eigen::MatrixXd t_matrix;      // (C*D) x R
  Eigen::MatrixXd ubm_variances; // C x D diagonal covariances of the UBM
  std::string ubm_ref;           // store key of the UBM this was trained against

  Eigen::Index Rank() const { return t_matrix.cols(); }
};

struct Embedding {
  Eigen::VectorXd vector;
  std::string profile_id;
  std::string source;  // speaker or utterance reference

  void CheckFinite() const {
    if (!vector.allFinite()) throw NumericError("embedding has non-finite entries");
  }
};

// Element-wise mean of embeddings sharing a profile and dimension.
inline Embedding AverageEmbeddings(const std::vector<Embedding> &list) {
  if (list.empty()) throw DataError("average_embeddings: empty list");
  Embedding out = list.front();
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (list[i].profile_id != out.profile_id)
      throw DataError("average_embeddings: mixed profiles");
    if (list[i].vector.size() != out.vector.size())
      throw DataError("average_embeddings: mixed dimensions");
    out.vector += list[i].vector;
  }
  out.vector /= static_cast<double>(list.size());
  return out;
}

namespace tv_detail {

// Posterior of the latent factor for one utterance:
//   L = I + T' Sigma^-1 N T,   mean = L^-1 T' Sigma^-1 f
struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;      // L
  Eigen::LLT<Eigen::MatrixXd> llt;  // of L
};

inline Posterior ComputePosterior(const BwStats &stats, const Eigen::MatrixXd &t_matrix,
                                  const Eigen::MatrixXd &ubm_variances,
                                  const std::vector<Eigen::MatrixXd> &gram /* per c */) {
  const Eigen::Index c_count = stats.NumComponents(), d = stats.Dim();
  const Eigen::Index rank = t_matrix.cols();
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(rank, rank);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rank);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    precision.noalias() += stats.n(c) * gram[static_cast<std::size_t>(c)];
    const auto t_block = t_matrix.middleRows(c * d, d);  // D x R
    b.noalias() += t_block.transpose() *
                   (stats.f.row(c).transpose().cwiseQuotient(ubm_variances.row(c).transpose()));
  }
  Posterior post;
  post.precision = precision;
  post.llt.compute(precision);
  if (post.llt.info() != Eigen::Success)
    throw NumericError("total-variability posterior is singular (rank too high for data)");
  post.mean = post.llt.solve(b);
  return post;
}

// Gram blocks G_c = T_c' Sigma_c^-1 T_c reused across utterances.
inline std::vector<Eigen::MatrixXd> GramBlocks(const Eigen::MatrixXd &t_matrix,
                                               const Eigen::MatrixXd &ubm_variances) {
  const Eigen::Index c_count = ubm_variances.rows(), d = ubm_variances.cols();
  std::vector<Eigen::MatrixXd> gram(static_cast<std::size_t>(c_count));
  for (Eigen::Index c = 0; c < c_count; ++c) {
    const auto t_block = t_matrix.middleRows(c * d, d);
    gram[static_cast<std::size_t>(c)] =
        t_block.transpose() * ubm_variances.row(c).transpose().cwiseInverse().asDiagonal() * t_block;
  }
  return gram;
}

}  // namespace tv_detail

struct TvTrainOptions {
  int rank = 400;
  int em_iterations = 5;
  unsigned long long seed = 0;
  bool minimum_divergence = true;
  // Called once per iteration with (iteration, auxiliary objective).
  std::function<void(int, double)> progress;
};

/**
   EM training of the total-variability matrix on Baum-Welch statistics.

   Each iteration computes the exact Gaussian posterior of w per utterance,
   re-estimates T row-block by row-block from the accumulated moments, and
   applies minimum-divergence re-estimation (T <- T chol(E[ww'])) so the
   latent prior stays standard normal.  The monitored auxiliary
   0.5 sum_u (mean_u' b_u - logdet L_u) is the variational bound up to
   T-independent constants and must not decrease (tests assert this).
*/
inline TotalVariability TrainTv(const std::vector<BwStats> &stats, const GmmUbm &ubm,
                                const TvTrainOptions &opts = {}) {
  if (stats.empty()) throw DataError("train_tv: no statistics");
  const Eigen::Index c_count = ubm.NumComponents(), d = ubm.Dim();
  const Eigen::Index rank = opts.rank;
  if (rank <= 0 || rank >= c_count * d)
    throw DataError("train_tv: rank must satisfy 0 < R < C*D");
  if (static_cast<Eigen::Index>(stats.size()) < rank)
    Warn("train_tv: fewer utterances than the subspace rank; estimates will be weak");

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd t_matrix(c_count * d, rank);
  for (Eigen::Index r = 0; r < t_matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < rank; ++c) t_matrix(r, c) = 0.001 * gauss(rng);

  for (int it = 0; it < opts.em_iterations; ++it) {
    const auto gram = tv_detail::GramBlocks(t_matrix, ubm.variances);
    // accumulators: per component, C_c = sum_u n_uc E[ww'], B_c = sum_u f_uc mean'
    std::vector<Eigen::MatrixXd> acc_c(
        static_cast<std::size_t>(c_count), Eigen::MatrixXd::Zero(rank, rank));
    std::vector<Eigen::MatrixXd> acc_b(
        static_cast<std::size_t>(c_count), Eigen::MatrixXd::Zero(d, rank));
    Eigen::MatrixXd sum_ww = Eigen::MatrixXd::Zero(rank, rank);
    double objective = 0.0;
    for (const auto &s : stats) {
      if (s.NumComponents() != c_count || s.Dim() != d)
        throw DataError("train_tv: statistics shape mismatch");
      auto post = tv_detail::ComputePosterior(s, t_matrix, ubm.variances, gram);
      Eigen::MatrixXd cov = post.llt.solve(Eigen::MatrixXd::Identity(rank, rank));
      Eigen::MatrixXd ww = cov + post.mean * post.mean.transpose();
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < rank; ++i)
        logdet += 2.0 * std::log(post.llt.matrixL()(i, i));
      objective += 0.5 * (post.mean.dot(post.precision * post.mean) - logdet);
      sum_ww += ww;
      for (Eigen::Index c = 0; c < c_count; ++c) {
        acc_c[static_cast<std::size_t>(c)] += s.n(c) * ww;
        acc_b[static_cast<std::size_t>(c)].noalias() +=
            s.f.row(c).transpose() * post.mean.transpose();
      }
    }
    if (opts.progress) opts.progress(it, objective);

    for (Eigen::Index c = 0; c < c_count; ++c) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(acc_c[static_cast<std::size_t>(c)]);
      if (ldlt.info() != Eigen::Success)
        throw NumericError("train_tv: singular accumulator (rank too high for data)");
      // T_c' solves C_c T_c' = B_c'
      t_matrix.middleRows(c * d, d) =
          ldlt.solve(acc_b[static_cast<std::size_t>(c)].transpose()).transpose();
    }

    if (opts.minimum_divergence) {
      Eigen::MatrixXd mean_ww = sum_ww / static_cast<double>(stats.size());
      Eigen::LLT<Eigen::MatrixXd> llt(mean_ww);
      if (llt.info() == Eigen::Success)
        t_matrix = t_matrix * Eigen::MatrixXd(llt.matrixL());
    }
  }

  TotalVariability tv;
  tv.t_matrix = std::move(t_matrix);
  tv.ubm_variances = ubm.variances;
  return tv;
}

// Caches the per-component Gram blocks so bulk extraction does not pay the
// T' Sigma^-1 T cost per utterance.
class IvectorExtractor {
 public:
  explicit IvectorExtractor(const TotalVariability &tv)
      : tv_(tv), gram_(tv_detail::GramBlocks(tv.t_matrix, tv.ubm_variances)) {}

  Embedding Extract(const BwStats &stats, const std::string &profile_id = "",
                    const std::string &source = "") const {
    if (stats.NumComponents() != tv_.ubm_variances.rows() ||
        stats.Dim() != tv_.ubm_variances.cols())
      throw DataError("extract_ivector: statistics/model dimension mismatch");
    auto post = tv_detail::ComputePosterior(stats, tv_.t_matrix, tv_.ubm_variances, gram_);
    Embedding e;
    e.vector = post.mean;
    e.profile_id = profile_id;
    e.source = source;
    e.CheckFinite();
    return e;
  }

 private:
  const TotalVariability &tv_;
  std::vector<Eigen::MatrixXd> gram_;
};

// Posterior mean of the latent factor: (I + T' Sigma^-1 N T)^-1 T' Sigma^-1 f.
// Zero statistics collapse to the prior mean (the zero vector).
inline Embedding ExtractIvector(const BwStats &stats, const TotalVariability &tv,
                                const std::string &profile_id = "",
                                const std::string &source = "") {
  return IvectorExtractor(tv).Extract(stats, profile_id, source);
}

template <>
struct ArtifactTraits<TotalVariability> {
  static constexpr std::uint32_t kTypeTag = 0x54560001;  // "TV",1
  static constexpr std::uint32_t kVersion = 1;
  static void Serialize(BlobWriter &w, const TotalVariability &tv) {
    w.WriteMatrix(tv.t_matrix);
    w.WriteMatrix(tv.ubm_variances);
    w.WriteString(tv.ubm_ref);
  }
  static TotalVariability Deserialize(BlobReader &r) {
    TotalVariability tv;
    tv.t_matrix = r.ReadMatrix();
    tv.ubm_variances = r.ReadMatrix();
    tv.ubm_ref = r.ReadString();
    return tv;
  }
};

template <>
struct ArtifactTraits<Embedding> {
  static constexpr std::uint32_t kTypeTag = 0x456d4201;  // "EmB",1
  static constexpr std::uint32_t kVersion = 1;
  static void Serialize(BlobWriter &w, const Embedding &e) {
    w.WriteVector(e.vector);
    w.WriteString(e.profile_id);
    w.WriteString(e.source);
  }
  static Embedding Deserialize(BlobReader &r) {
    Embedding e;
    e.vector = r.ReadVector();
    e.profile_id = r.ReadString();
    e.source = r.ReadString();
    return e;
  }
};

}  // namespace asvmimic
