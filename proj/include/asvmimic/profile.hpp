// asvmimic/profile.hpp

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

#include <string>

#include "asvmimic/frontend.hpp"
#include "asvmimic/gmm.hpp"
#include "asvmimic/ivector.hpp"
#include "asvmimic/lda.hpp"
#include "asvmimic/plda.hpp"

namespace asvmimic {

// One complete ASV system configuration.  Two of these, with deliberately
// different front-ends, embedding sizes, back-ends, and disjoint training
// partitions, play the public (attacker-side) and black-box (attacked)
// systems.
struct SystemProfile {
  std::string profile_id;
  FrontendConfig frontend;
  int ubm_components = 256;
  int ivector_dim = 400;
  int lda_dim = 250;
  PldaVariant plda_variant = PldaVariant::kSimplified;
  int plda_speaker_dim = 200;
  std::string train_partition;  // utterance partition tag selecting dev data
  int ubm_em_iterations = 5;
  int tv_em_iterations = 5;
  int plda_em_iterations = 10;
  unsigned long long seed = 0;
};

// The attacker-side system: 60-D MFCC+deltas with RASTA and CMVN, 400-D
// i-vectors, LDA to 250, simplified PLDA with a 200-D speaker subspace.
inline SystemProfile PublicProfile() {
  SystemProfile p;
  p.profile_id = "a";
  p.frontend.n_mfcc = 20;
  p.frontend.n_mel_filters = 20;
  p.frontend.include_deltas = true;
  p.frontend.rasta = true;
  p.frontend.norm = NormKind::kCmvn;
  p.ubm_components = 256;
  p.ivector_dim = 400;
  p.lda_dim = 250;
  p.plda_variant = PldaVariant::kSimplified;
  p.plda_speaker_dim = 200;
  p.train_partition = "train_a";
  p.seed = 1001;
  return p;
}

// The attacked system stand-in: an independently trained classical stack
// with the alternative front-end (30 MFCCs, no deltas, sliding CMN), a
// 512-D embedding, LDA to 200, and two-covariance PLDA.
inline SystemProfile BlackBoxProfile() {
  SystemProfile p;
  p.profile_id = "b";
  p.frontend.n_mfcc = 30;
  p.frontend.n_mel_filters = 30;
  p.frontend.include_deltas = false;
  p.frontend.rasta = false;
  p.frontend.norm = NormKind::kSlidingCmn;
  p.ubm_components = 256;
  p.ivector_dim = 512;
  p.lda_dim = 200;
  p.plda_variant = PldaVariant::kTwoCov;
  p.train_partition = "train_b";
  p.seed = 2002;
  return p;
}

// Shrinks a profile's model sizes for desk-scale corpora while keeping the
// front-end (and therefore the feature dimensionality) of the full system.
inline SystemProfile DeskScale(SystemProfile p, int ubm_components, int ivector_dim,
                               int lda_dim, int plda_speaker_dim) {
  p.ubm_components = ubm_components;
  p.ivector_dim = ivector_dim;
  p.lda_dim = lda_dim;
  p.plda_speaker_dim = plda_speaker_dim;
  return p;
}

// Fitted back-end transforms plus the scoring model.
struct BackendStack {
  LdaTransform lda;
  Whitener whitener;
  PldaModel plda;

  Eigen::VectorXd Transform(const Eigen::VectorXd &raw) const {
    return ApplyWhitenLnorm(lda, whitener, raw);
  }
};

// Everything needed to embed and score with one profile.
struct TrainedSystem {
  SystemProfile profile;
  GmmUbm ubm;
  TotalVariability tv;
  BackendStack backend;
};

// Store keys for the five persisted artifacts of a profile.
inline std::string StoreKeyUbm(const std::string &profile_id) { return "profile/" + profile_id + "/ubm"; }
inline std::string StoreKeyTv(const std::string &profile_id) { return "profile/" + profile_id + "/tv"; }
inline std::string StoreKeyLda(const std::string &profile_id) { return "profile/" + profile_id + "/lda"; }
inline std::string StoreKeyWhitener(const std::string &profile_id) { return "profile/" + profile_id + "/whitener"; }
inline std::string StoreKeyPlda(const std::string &profile_id) { return "profile/" + profile_id + "/plda"; }
inline std::string StoreKeyEmbedding(const std::string &profile_id, const std::string &utterance_id) {
  return "embedding/" + profile_id + "/" + utterance_id;
}

inline void SaveTrainedSystem(const ArtifactStore &store, const TrainedSystem &sys) {
  store.Put(StoreKeyUbm(sys.profile.profile_id), sys.ubm);
  store.Put(StoreKeyTv(sys.profile.profile_id), sys.tv);
  store.Put(StoreKeyLda(sys.profile.profile_id), sys.backend.lda);
  store.Put(StoreKeyWhitener(sys.profile.profile_id), sys.backend.whitener);
  store.Put(StoreKeyPlda(sys.profile.profile_id), sys.backend.plda);
}

inline TrainedSystem LoadTrainedSystem(const ArtifactStore &store, const SystemProfile &profile) {
  TrainedSystem sys;
  sys.profile = profile;
  sys.ubm = store.Get<GmmUbm>(StoreKeyUbm(profile.profile_id));
  sys.tv = store.Get<TotalVariability>(StoreKeyTv(profile.profile_id));
  sys.backend.lda = store.Get<LdaTransform>(StoreKeyLda(profile.profile_id));
  sys.backend.whitener = store.Get<Whitener>(StoreKeyWhitener(profile.profile_id));
  sys.backend.plda = store.Get<PldaModel>(StoreKeyPlda(profile.profile_id));
  return sys;
}

}  // namespace asvmimic
