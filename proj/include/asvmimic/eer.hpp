// asvmimic/eer.hpp

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
#include <vector>

#include "asvmimic/common.hpp"

namespace asvmimic {

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/**
   Equal error rate by threshold sweep with linear interpolation.

   A trial is accepted when its score >= threshold.  Sweeping the threshold
   down through the distinct score values (tie scores grouped) traces the ROC
   as a polyline of (FAR, FRR) vertices; the EER is the value where the
   segment between adjacent vertices crosses FAR = FRR, interpolated
   linearly.  Because the vertices depend only on score ranks, the EER is
   invariant under any strictly monotone transform of all scores.
*/
inline EerResult ComputeEer(std::vector<double> target_scores,
                            std::vector<double> nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty())
    throw DataError("compute_eer: need at least one target and one nontarget score");
  std::sort(target_scores.begin(), target_scores.end());
  std::sort(nontarget_scores.begin(), nontarget_scores.end());
  const double nt = static_cast<double>(target_scores.size());
  const double nn = static_cast<double>(nontarget_scores.size());

  std::vector<double> thresholds;
  thresholds.reserve(target_scores.size() + nontarget_scores.size() + 2);
  const double lo = std::min(target_scores.front(), nontarget_scores.front());
  const double hi = std::max(target_scores.back(), nontarget_scores.back());
  thresholds.push_back(hi + 1.0);  // accepts nothing
  {
    std::vector<double> pooled;
    pooled.reserve(target_scores.size() + nontarget_scores.size());
    pooled.insert(pooled.end(), target_scores.begin(), target_scores.end());
    pooled.insert(pooled.end(), nontarget_scores.begin(), nontarget_scores.end());
    std::sort(pooled.begin(), pooled.end(), std::greater<double>());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
    thresholds.insert(thresholds.end(), pooled.begin(), pooled.end());
  }
  thresholds.push_back(lo - 1.0);  // accepts everything

  auto far_at = [&](double th) {
    const auto it = std::lower_bound(nontarget_scores.begin(), nontarget_scores.end(), th);
    return static_cast<double>(nontarget_scores.end() - it) / nn;
  };
  auto frr_at = [&](double th) {
    const auto it = std::lower_bound(target_scores.begin(), target_scores.end(), th);
    return static_cast<double>(it - target_scores.begin()) / nt;
  };

  double prev_th = thresholds[0];
  double prev_far = far_at(prev_th), prev_frr = frr_at(prev_th);
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const double th = thresholds[i];
    const double far = far_at(th), frr = frr_at(th);
    const double diff_prev = prev_frr - prev_far;
    const double diff = frr - far;
    if (diff <= 0.0) {
      EerResult r;
      if (diff_prev <= 0.0 || diff_prev == diff) {  // crossing sits on the vertex
        r.eer = (far + frr) / 2.0;
        r.threshold = th;
        return r;
      }
      const double t = diff_prev / (diff_prev - diff);
      r.eer = prev_far + t * (far - prev_far);
      r.threshold = prev_th + t * (th - prev_th);
      return r;
    }
    prev_th = th;
    prev_far = far;
    prev_frr = frr;
  }
  // diff starts at +1 and ends at -1, so the sweep always crosses
  throw NumericError("compute_eer: no crossing found");
}

}  // namespace asvmimic
