// asvmimic/dtw.hpp

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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "asvmimic/common.hpp"
#include "asvmimic/frontend.hpp"

namespace asvmimic {

// Monotone boundary-to-boundary alignment; steps from {(1,0),(0,1),(1,1)}.
struct AlignmentPath {
  std::vector<std::pair<int, int>> pairs;

  std::size_t Length() const { return pairs.size(); }
};

struct DtwResult {
  AlignmentPath path;
  double cost = 0.0;  // optimal accumulated distance

  double MeanStepCost() const {
    return path.pairs.empty() ? 0.0 : cost / static_cast<double>(path.pairs.size());
  }
};

// Cosine distance between frame vectors; zero-norm frames compare equal to
// each other and maximally distant to everything else.
inline double CosineDistance(const Eigen::RowVectorXd &a, const Eigen::RowVectorXd &b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

/**
   Dynamic time warping under summed per-frame cosine distance.  Ties prefer
   the diagonal step, so identical sequences align along the pure diagonal at
   cost zero.  The returned cost is the dynamic-programming optimum, which
   the tests cross-check against exhaustive path enumeration.
*/
inline DtwResult DtwAlign(const FeatureMatrix &feat_a, const FeatureMatrix &feat_b) {
  const Eigen::Index ta = feat_a.NumFrames(), tb = feat_b.NumFrames();
  if (ta == 0 || tb == 0) throw DataError("dtw_align: empty input");
  if (feat_a.Dim() != feat_b.Dim()) throw DataError("dtw_align: dimension mismatch");

  Eigen::MatrixXd acc(ta, tb);
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> parent(ta, tb);
  enum : std::int8_t { kDiag = 0, kUp = 1, kLeft = 2, kStart = 3 };

  for (Eigen::Index i = 0; i < ta; ++i) {
    for (Eigen::Index j = 0; j < tb; ++j) {
      const double cost = CosineDistance(feat_a.frames.row(i), feat_b.frames.row(j));
      if (i == 0 && j == 0) {
        acc(i, j) = cost;
        parent(i, j) = kStart;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      std::int8_t who = kStart;
      if (i > 0 && j > 0 && acc(i - 1, j - 1) < best) {
        best = acc(i - 1, j - 1);
        who = kDiag;
      }
      if (i > 0 && acc(i - 1, j) < best) {
        best = acc(i - 1, j);
        who = kUp;
      }
      if (j > 0 && acc(i, j - 1) < best) {
        best = acc(i, j - 1);
        who = kLeft;
      }
      acc(i, j) = best + cost;
      parent(i, j) = who;
    }
  }

  DtwResult result;
  result.cost = acc(ta - 1, tb - 1);
  Eigen::Index i = ta - 1, j = tb - 1;
  while (true) {
    result.path.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    const std::int8_t p = parent(i, j);
    if (p == kStart) break;
    if (p == kDiag) {
      --i;
      --j;
    } else if (p == kUp) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(result.path.pairs.begin(), result.path.pairs.end());
  return result;
}

}  // namespace asvmimic
