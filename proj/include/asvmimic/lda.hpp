// asvmimic/lda.hpp

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

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "asvmimic/common.hpp"
#include "asvmimic/serial.hpp"
#include "asvmimic/store.hpp"

namespace asvmimic {

struct LdaTransform {
  Eigen::MatrixXd projection;  // R x L, columns are discriminant directions
  Eigen::VectorXd input_mean;  // length R

  Eigen::VectorXd Apply(const Eigen::VectorXd &x) const {
    if (x.size() != input_mean.size()) throw DataError("lda: dimension mismatch");
    return projection.transpose() * (x - input_mean);
  }
};

struct Whitener {
  Eigen::VectorXd mean;       // length L
  Eigen::MatrixXd whitening;  // L x L, symmetric inverse square root of cov

  Eigen::VectorXd Apply(const Eigen::VectorXd &x) const {
    if (x.size() != mean.size()) throw DataError("whitener: dimension mismatch");
    return whitening * (x - mean);
  }
};

// Labeled embedding set, the common training input of the backend stages.
struct LabeledVectors {
  Eigen::MatrixXd vectors;          // N x R, one row per embedding
  std::vector<std::string> labels;  // length N, speaker ids
};

namespace lda_detail {

struct Scatter {
  Eigen::MatrixXd between;  // S_b / N
  Eigen::MatrixXd within;   // S_w / N
  Eigen::VectorXd mean;
  int num_classes = 0;
};

inline Scatter ComputeScatter(const LabeledVectors &data) {
  const Eigen::Index n = data.vectors.rows(), d = data.vectors.cols();
  if (n == 0) throw DataError("lda: no training vectors");
  if (static_cast<std::size_t>(n) != data.labels.size())
    throw DataError("lda: labels/vectors size mismatch");
  std::map<std::string, std::vector<Eigen::Index>> classes;
  for (Eigen::Index i = 0; i < n; ++i) classes[data.labels[static_cast<std::size_t>(i)]].push_back(i);

  Scatter s;
  s.num_classes = static_cast<int>(classes.size());
  s.mean = data.vectors.colwise().mean().transpose();
  s.between = Eigen::MatrixXd::Zero(d, d);
  s.within = Eigen::MatrixXd::Zero(d, d);
  for (const auto &[label, idx] : classes) {
    Eigen::VectorXd class_mean = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i : idx) class_mean += data.vectors.row(i).transpose();
    class_mean /= static_cast<double>(idx.size());
    const Eigen::VectorXd cb = class_mean - s.mean;
    s.between += static_cast<double>(idx.size()) * cb * cb.transpose();
    for (Eigen::Index i : idx) {
      const Eigen::VectorXd cw = data.vectors.row(i).transpose() - class_mean;
      s.within += cw * cw.transpose();
    }
  }
  s.between /= static_cast<double>(n);
  s.within /= static_cast<double>(n);
  return s;
}

}  // namespace lda_detail

// Fisher objective tr((P' Sw P)^-1 (P' Sb P)) for a fitted projection; used
// by the rotation-equivariance tests.
inline double FisherObjective(const LdaTransform &lda, const LabeledVectors &data) {
  auto s = lda_detail::ComputeScatter(data);
  const Eigen::MatrixXd pw = lda.projection.transpose() * s.within * lda.projection;
  const Eigen::MatrixXd pb = lda.projection.transpose() * s.between * lda.projection;
  return (pw.ldlt().solve(pb)).trace();
}

/**
   LDA training: columns are the top generalized eigenvectors of
   (S_between, S_within), with the within-class scatter regularized by
   eps*I, eps = 1e-6 * trace(S_within)/L.  L is clamped to n_classes-1 with
   a warning.  Column signs are fixed deterministically (largest absolute
   entry positive).
*/
inline LdaTransform TrainLda(const LabeledVectors &data, int out_dim) {
  auto s = lda_detail::ComputeScatter(data);
  if (s.num_classes < 2) throw DataError("train_lda: need at least 2 classes");
  const Eigen::Index d = data.vectors.cols();
  int l = out_dim;
  if (l > s.num_classes - 1) {
    Warn("train_lda: requested dimension " + std::to_string(l) + " clamped to " +
         std::to_string(s.num_classes - 1) + " (n_classes-1)");
    l = s.num_classes - 1;
  }
  if (l <= 0 || l > d) throw DataError("train_lda: invalid output dimension");

  const double eps = 1e-6 * s.within.trace() / static_cast<double>(l);
  Eigen::MatrixXd within = s.within + eps * Eigen::MatrixXd::Identity(d, d);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(s.between, within);
  if (solver.info() != Eigen::Success)
    throw NumericError("train_lda: generalized eigensolver failed");

  // eigenvalues ascend; take the top l columns in descending order
  LdaTransform lda;
  lda.input_mean = s.mean;
  lda.projection.resize(d, l);
  for (int j = 0; j < l; ++j) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - j);
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v(argmax) < 0.0) v = -v;
    lda.projection.col(j) = v;
  }
  return lda;
}

// Fits mean and the symmetric inverse square root of the sample covariance
// (population normalization), so whitened training data has identity
// covariance.
inline Whitener FitWhitener(const Eigen::MatrixXd &vectors) {
  const Eigen::Index n = vectors.rows(), d = vectors.cols();
  if (n < 2) throw DataError("fit_whitener: need at least 2 vectors");
  Whitener w;
  w.mean = vectors.colwise().mean().transpose();
  Eigen::MatrixXd centered = vectors.rowwise() - w.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericError("fit_whitener: eigensolver failed");
  const double floor = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
  Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
  w.whitening = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return w;
}

// Scales to unit Euclidean norm; zero vectors cannot be normalized.
inline Eigen::VectorXd LengthNormalize(const Eigen::VectorXd &x) {
  const double norm = x.norm();
  if (norm == 0.0) throw DataError("length_normalize: zero vector");
  return x / norm;
}

// LDA projection, whitening, then length normalization.
inline Eigen::VectorXd ApplyWhitenLnorm(const LdaTransform &lda, const Whitener &whitener,
                                        const Eigen::VectorXd &x) {
  return LengthNormalize(whitener.Apply(lda.Apply(x)));
}

template <>
struct ArtifactTraits<LdaTransform> {
  static constexpr std::uint32_t kTypeTag = 0x4c444101;  // "LDA",1
  static constexpr std::uint32_t kVersion = 1;
  static void Serialize(BlobWriter &w, const LdaTransform &t) {
    w.WriteMatrix(t.projection);
    w.WriteVector(t.input_mean);
  }
  static LdaTransform Deserialize(BlobReader &r) {
    LdaTransform t;
    t.projection = r.ReadMatrix();
    t.input_mean = r.ReadVector();
    return t;
  }
};

template <>
struct ArtifactTraits<Whitener> {
  static constexpr std::uint32_t kTypeTag = 0x57485401;  // "WHT",1
  static constexpr std::uint32_t kVersion = 1;
  static void Serialize(BlobWriter &w, const Whitener &t) {
    w.WriteVector(t.mean);
    w.WriteMatrix(t.whitening);
  }
  static Whitener Deserialize(BlobReader &r) {
    Whitener t;
    t.mean = r.ReadVector();
    t.whitening = r.ReadMatrix();
    return t;
  }
};

}  // namespace asvmimic
