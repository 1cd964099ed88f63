// asvmimic/pipeline.hpp

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

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "asvmimic/attack.hpp"
#include "asvmimic/audio.hpp"
#include "asvmimic/eer.hpp"
#include "asvmimic/frontend.hpp"
#include "asvmimic/gmm.hpp"
#include "asvmimic/ivector.hpp"
#include "asvmimic/manifest.hpp"
#include "asvmimic/profile.hpp"
#include "asvmimic/store.hpp"

namespace asvmimic {

/**
   Deterministic parallel map: workers pull indices from a shared counter and
   write into preallocated slots, so the result only depends on the per-index
   function, never on the worker count or scheduling.  Reductions over the
   results must then run in index order.
*/
template <typename Result>
std::vector<Result> ParallelMap(std::size_t count, int jobs,
                                const std::function<Result(std::size_t)> &fn) {
  std::vector<Result> results(count);
  if (count == 0) return results;
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        results[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);  // stop handing out work
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto &t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

// Reads, resamples to 16 kHz if needed, and runs the profile front-end.
inline FeatureMatrix UtteranceFeatures(const UtteranceRecord &utt, const std::string &audio_root,
                                       const FrontendConfig &frontend) {
  const std::filesystem::path p = std::filesystem::path(utt.audio_path).is_absolute()
                                      ? std::filesystem::path(utt.audio_path)
                                      : std::filesystem::path(audio_root) / utt.audio_path;
  AudioBuffer audio = ReadWav(p.string());
  if (audio.sample_rate_hz != 16000) audio = Resample(audio, 16000);
  return ComputeFrontend(audio, frontend);
}

struct TrainingLogEntry {
  std::string stage;
  int detail = 0;      // component count or iteration
  int iteration = 0;
  double objective = 0.0;
};

/**
   Trains the full stack of one profile on its manifest partition: front-end
   features -> UBM -> Baum-Welch statistics -> total-variability subspace ->
   i-vectors -> LDA -> whitening -> length norm -> PLDA.  The returned log
   carries every per-iteration objective.
*/
inline TrainedSystem TrainProfile(const Manifest &manifest, const SystemProfile &profile,
                                  const std::string &audio_root, int jobs,
                                  std::vector<TrainingLogEntry> *log = nullptr) {
  std::vector<const UtteranceRecord *> train_utts;
  for (const auto &u : manifest.utterances)
    if (u.partition && *u.partition == profile.train_partition) train_utts.push_back(&u);
  if (train_utts.empty())
    throw DataError("train: manifest has no utterances with partition tag '" +
                    profile.train_partition + "'");

  auto features = ParallelMap<FeatureMatrix>(
      train_utts.size(), jobs,
      [&](std::size_t i) { return UtteranceFeatures(*train_utts[i], audio_root, profile.frontend); });

  auto log_entry = [&](const std::string &stage, int detail, int it, double obj) {
    if (log != nullptr) log->push_back({stage, detail, it, obj});
    Log(stage + "[" + std::to_string(detail) + "] iter " + std::to_string(it) +
        " objective " + std::to_string(obj));
  };

  UbmTrainOptions ubm_opts;
  ubm_opts.num_components = profile.ubm_components;
  ubm_opts.em_iterations = profile.ubm_em_iterations;
  ubm_opts.seed = profile.seed;
  ubm_opts.progress = [&](int c, int it, double ll) { log_entry("ubm", c, it, ll); };

  TrainedSystem sys;
  sys.profile = profile;
  sys.ubm = TrainUbm(features, ubm_opts);

  auto stats = ParallelMap<BwStats>(features.size(), jobs, [&](std::size_t i) {
    return AccumulateBw(features[i], sys.ubm);
  });

  TvTrainOptions tv_opts;
  tv_opts.rank = profile.ivector_dim;
  tv_opts.em_iterations = profile.tv_em_iterations;
  tv_opts.seed = profile.seed + 1;
  tv_opts.progress = [&](int it, double obj) { log_entry("tv", profile.ivector_dim, it, obj); };
  sys.tv = TrainTv(stats, sys.ubm, tv_opts);
  sys.tv.ubm_ref = StoreKeyUbm(profile.profile_id);

  IvectorExtractor extractor(sys.tv);
  auto ivectors = ParallelMap<Embedding>(stats.size(), jobs, [&](std::size_t i) {
    return extractor.Extract(stats[i], profile.profile_id, train_utts[i]->utterance_id);
  });

  LabeledVectors labeled;
  labeled.vectors.resize(static_cast<Eigen::Index>(ivectors.size()), profile.ivector_dim);
  labeled.labels.resize(ivectors.size());
  for (std::size_t i = 0; i < ivectors.size(); ++i) {
    labeled.vectors.row(static_cast<Eigen::Index>(i)) = ivectors[i].vector.transpose();
    labeled.labels[i] = train_utts[i]->speaker_id;
  }

  sys.backend.lda = TrainLda(labeled, profile.lda_dim);
  Eigen::MatrixXd projected(labeled.vectors.rows(), sys.backend.lda.projection.cols());
  for (Eigen::Index i = 0; i < labeled.vectors.rows(); ++i)
    projected.row(i) = sys.backend.lda.Apply(labeled.vectors.row(i).transpose()).transpose();
  sys.backend.whitener = FitWhitener(projected);

  LabeledVectors normalized;
  normalized.vectors.resize(projected.rows(), projected.cols());
  normalized.labels = labeled.labels;
  for (Eigen::Index i = 0; i < projected.rows(); ++i)
    normalized.vectors.row(i) =
        LengthNormalize(sys.backend.whitener.Apply(projected.row(i).transpose())).transpose();

  PldaTrainOptions plda_opts;
  plda_opts.variant = profile.plda_variant;
  plda_opts.speaker_dim = std::min<int>(profile.plda_speaker_dim,
                                        static_cast<int>(normalized.vectors.cols()));
  plda_opts.em_iterations = profile.plda_em_iterations;
  plda_opts.progress = [&](int it, double obj) { log_entry("plda", 0, it, obj); };
  sys.backend.plda = TrainPlda(normalized, plda_opts);
  return sys;
}

struct UtteranceInfo {
  std::string utterance_id;
  double active_speech_s = 0.0;
  double duration_s = 0.0;
};

struct ExtractionResult {
  std::map<std::string, Embedding> embeddings;  // raw i-vectors by utterance id
  std::vector<UtteranceInfo> info;              // manifest order
};

// Embeds every utterance of the manifest with one system and reports
// SAD-active speech per utterance.  Deterministic for any worker count.
inline ExtractionResult ExtractAll(const Manifest &manifest, const TrainedSystem &sys,
                                   const std::string &audio_root, int jobs) {
  IvectorExtractor extractor(sys.tv);
  struct Row {
    Embedding embedding;
    UtteranceInfo info;
  };
  auto rows = ParallelMap<Row>(manifest.utterances.size(), jobs, [&](std::size_t i) {
    const UtteranceRecord &utt = manifest.utterances[i];
    const FeatureMatrix feat = UtteranceFeatures(utt, audio_root, sys.profile.frontend);
    Row row;
    row.embedding =
        extractor.Extract(AccumulateBw(feat, sys.ubm), sys.profile.profile_id, utt.utterance_id);
    row.info.utterance_id = utt.utterance_id;
    row.info.active_speech_s =
        feat.CountSpeechFrames() * sys.profile.frontend.hop_ms / 1000.0;
    row.info.duration_s = utt.duration_s;
    return row;
  });
  ExtractionResult result;
  for (auto &row : rows) {
    result.embeddings.emplace(row.info.utterance_id, std::move(row.embedding));
    result.info.push_back(row.info);
  }
  return result;
}

// Pooled (averaged) raw embedding per speaker over the given session.
inline std::map<std::string, Embedding> PoolSpeakerEmbeddings(
    const Manifest &manifest, const std::map<std::string, Embedding> &embeddings,
    std::optional<Session> session = std::nullopt) {
  std::map<std::string, Embedding> pooled;
  for (const auto &spk : manifest.speakers) {
    std::vector<Embedding> members;
    for (const auto *utt : manifest.UtterancesOf(spk.speaker_id)) {
      if (session && utt->session != *session) continue;
      auto it = embeddings.find(utt->utterance_id);
      if (it != embeddings.end()) members.push_back(it->second);
    }
    if (!members.empty()) {
      Embedding avg = AverageEmbeddings(members);
      avg.source = spk.speaker_id;
      pooled.emplace(spk.speaker_id, std::move(avg));
    }
  }
  return pooled;
}

/**
   Held-out verification protocol over the "eval" partition: each target
   speaker is enrolled on its non-eval utterances (averaged raw i-vectors,
   then the back-end), every eval utterance is a target trial against its own
   speaker and a nontarget trial against every other enrolled speaker.
*/
inline EerResult EvaluateHeldOutEer(const Manifest &manifest,
                                    const std::map<std::string, Embedding> &embeddings,
                                    const BackendStack &backend) {
  PldaScorer scorer(backend.plda);
  std::map<std::string, Eigen::VectorXd> enrolled;
  std::vector<std::pair<std::string, Eigen::VectorXd>> tests;  // (speaker, vector)
  for (const auto &spk : manifest.speakers) {
    if (spk.role != Role::kTarget) continue;
    std::vector<Embedding> enroll_members;
    for (const auto *utt : manifest.UtterancesOf(spk.speaker_id)) {
      const bool is_eval = utt->partition && *utt->partition == "eval";
      auto it = embeddings.find(utt->utterance_id);
      if (it == embeddings.end())
        throw DataError("eer: missing embedding for '" + utt->utterance_id + "'");
      if (is_eval)
        tests.emplace_back(spk.speaker_id, backend.Transform(it->second.vector));
      else
        enroll_members.push_back(it->second);
    }
    if (!enroll_members.empty())
      enrolled.emplace(spk.speaker_id,
                       backend.Transform(AverageEmbeddings(enroll_members).vector));
  }
  if (tests.empty()) throw DataError("eer: manifest has no utterances tagged 'eval'");

  std::vector<double> target_scores, nontarget_scores;
  for (const auto &[speaker, vec] : tests) {
    for (const auto &[enr_speaker, enr_vec] : enrolled) {
      const double llr = scorer.PairLlr(enr_vec, vec);
      (enr_speaker == speaker ? target_scores : nontarget_scores).push_back(llr);
    }
  }
  return ComputeEer(std::move(target_scores), std::move(nontarget_scores));
}

}  // namespace asvmimic
