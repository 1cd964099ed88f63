// asvmimic/attack.hpp

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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "asvmimic/ivector.hpp"
#include "asvmimic/manifest.hpp"
#include "asvmimic/profile.hpp"

namespace asvmimic {

enum class RankCategory { kClosest, kMedian, kFurthest, kCommon };
enum class LanguagePool { kNative, kNonnative };
enum class AttackCondition { kZeroEffort, kMimicry, kGenuine };

inline std::string ToString(RankCategory c) {
  switch (c) {
    case RankCategory::kClosest: return "closest";
    case RankCategory::kMedian: return "median";
    case RankCategory::kFurthest: return "furthest";
    default: return "common";
  }
}
inline std::string ToString(LanguagePool p) {
  return p == LanguagePool::kNative ? "native" : "nonnative";
}
inline std::string ToString(AttackCondition c) {
  switch (c) {
    case AttackCondition::kZeroEffort: return "zero_effort";
    case AttackCondition::kMimicry: return "mimicry";
    default: return "genuine";
  }
}
inline RankCategory ParseRankCategory(const std::string &s) {
  if (s == "closest") return RankCategory::kClosest;
  if (s == "median") return RankCategory::kMedian;
  if (s == "furthest") return RankCategory::kFurthest;
  if (s == "common") return RankCategory::kCommon;
  throw DataError("invalid rank category: '" + s + "'");
}
inline LanguagePool ParseLanguagePool(const std::string &s) {
  if (s == "native") return LanguagePool::kNative;
  if (s == "nonnative") return LanguagePool::kNonnative;
  throw DataError("invalid language pool: '" + s + "'");
}
inline AttackCondition ParseAttackCondition(const std::string &s) {
  if (s == "zero_effort") return AttackCondition::kZeroEffort;
  if (s == "mimicry") return AttackCondition::kMimicry;
  if (s == "genuine") return AttackCondition::kGenuine;
  throw DataError("invalid attack condition: '" + s + "'");
}

// One attacker's similarity ranking over a filtered target pool,
// strictly ordered: descending score, ties broken by ascending target id.
struct RankedTargets {
  struct Entry {
    std::string target_id;
    double score = 0.0;
  };
  std::string attacker_id;
  std::vector<Entry> entries;
  std::string filter_tag;

  double ScoreOf(const std::string &target_id) const {
    for (const auto &e : entries)
      if (e.target_id == target_id) return e.score;
    throw DataError("ranking does not contain target '" + target_id + "'");
  }
};

struct TargetAssignment {
  std::string attacker_id;
  RankCategory rank_category = RankCategory::kClosest;
  std::string target_id;
  LanguagePool language_pool = LanguagePool::kNative;
};

// Sorting contract shared by every ranking producer.
inline void SortRanking(std::vector<RankedTargets::Entry> &entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const RankedTargets::Entry &a, const RankedTargets::Entry &b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.target_id < b.target_id;
                   });
}

/**
   Scores one attacker's averaged natural-voice embedding against every
   target in the filtered pool (pooled per-speaker embeddings, back-end
   applied to both sides) and returns the descending ranking.
*/
inline RankedTargets RankTargets(
    const std::string &attacker_id, const Embedding &attacker_embedding,
    const std::vector<std::pair<const SpeakerRecord *, Embedding>> &target_pool,
    const std::function<bool(const SpeakerRecord &)> &filter, const BackendStack &backend,
    const std::string &filter_tag) {
  RankedTargets out;
  out.attacker_id = attacker_id;
  out.filter_tag = filter_tag;
  const Eigen::VectorXd test = backend.Transform(attacker_embedding.vector);
  PldaScorer scorer(backend.plda);
  for (const auto &[speaker, emb] : target_pool) {
    if (speaker == nullptr || speaker->role != Role::kTarget) continue;
    if (!filter(*speaker)) continue;
    const Eigen::VectorXd enroll = backend.Transform(emb.vector);
    out.entries.push_back({speaker->speaker_id, scorer.PairLlr(enroll, test)});
  }
  if (out.entries.empty()) throw DataError("rank_targets: empty filtered target pool");
  SortRanking(out.entries);
  return out;
}

// Closest = rank 1, furthest = last, median = 0-indexed floor((n-1)/2).
inline std::vector<TargetAssignment> SelectTargets(const RankedTargets &ranked,
                                                   LanguagePool pool) {
  const std::size_t n = ranked.entries.size();
  if (n < 3) throw DataError("select_targets: need at least 3 ranked targets");
  auto make = [&](RankCategory cat, std::size_t index) {
    TargetAssignment a;
    a.attacker_id = ranked.attacker_id;
    a.rank_category = cat;
    a.target_id = ranked.entries[index].target_id;
    a.language_pool = pool;
    return a;
  };
  return {make(RankCategory::kClosest, 0), make(RankCategory::kMedian, (n - 1) / 2),
          make(RankCategory::kFurthest, n - 1)};
}

// Per-utterance candidate for test material selection.
struct UtteranceCandidate {
  std::string utterance_id;
  double score = 0.0;           // attacker embedding vs this utterance
  double active_speech_s = 0.0; // SAD-active duration
  bool quality_ok = true;
};

/**
   Greedy utterance selection for a target: order the candidates by the
   category rule (closest: best score first; furthest: worst first; median:
   nearest the per-target mean first) and accumulate until the active-speech
   floor is met.  Quality-flagged utterances are skipped, mirroring the
   manual audit they replace.
*/
inline std::vector<std::string> SelectUtterances(RankCategory category,
                                                 std::vector<UtteranceCandidate> candidates,
                                                 double min_active_speech_s = 30.0) {
  std::erase_if(candidates, [](const UtteranceCandidate &c) { return !c.quality_ok; });
  if (candidates.empty()) throw DataError("select_utterances: no usable candidates");
  double mean = 0.0;
  for (const auto &c : candidates) mean += c.score;
  mean /= static_cast<double>(candidates.size());

  auto key = [&](const UtteranceCandidate &c) {
    switch (category) {
      case RankCategory::kFurthest: return c.score;           // ascending
      case RankCategory::kMedian: return std::fabs(c.score - mean);
      default: return -c.score;                               // closest/common: descending
    }
  };
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const UtteranceCandidate &a, const UtteranceCandidate &b) {
                     const double ka = key(a), kb = key(b);
                     if (ka != kb) return ka < kb;
                     return a.utterance_id < b.utterance_id;
                   });
  std::vector<std::string> selected;
  double total = 0.0;
  for (const auto &c : candidates) {
    selected.push_back(c.utterance_id);
    total += c.active_speech_s;
    if (total >= min_active_speech_s) return selected;
  }
  Warn("select_utterances: only " + std::to_string(total) +
       " s of active speech available (want " + std::to_string(min_active_speech_s) + ")");
  return selected;
}

struct AttackTrial {
  TargetAssignment assignment;
  std::vector<std::string> enrollment_utts;  // target utterances, tests excluded
  std::string test_utt;
  AttackCondition condition = AttackCondition::kZeroEffort;
  std::optional<std::string> prompt_id;
};

using AttackTrialSet = std::vector<AttackTrial>;

/**
   Builds genuine, zero-effort, and mimicry trials for each assignment.
   The target is enrolled on everything except its selected test utterances;
   attack trials submit the attacker's zero-effort and mimicry recordings.
   Prompt ids ride along so downstream analyses can pair by spoken content.
*/
inline AttackTrialSet BuildAttackTrials(
    const std::vector<TargetAssignment> &assignments, const Manifest &manifest,
    const std::map<std::string, std::vector<std::string>> &test_selection /* key: AssignmentKey */) {
  AttackTrialSet trials;
  for (const auto &a : assignments) {
    const std::string key = a.attacker_id + "/" + ToString(a.rank_category) + "/" + a.target_id;
    const auto sel = test_selection.find(key);
    if (sel == test_selection.end() || sel->second.empty())
      throw DataError("build_attack_trials: no test utterances selected for " + key);
    const std::set<std::string> tests(sel->second.begin(), sel->second.end());

    std::vector<std::string> enrollment;
    for (const auto *utt : manifest.UtterancesOf(a.target_id))
      if (!tests.count(utt->utterance_id)) enrollment.push_back(utt->utterance_id);
    if (enrollment.empty())
      throw DataError("build_attack_trials: target '" + a.target_id +
                      "' has no enrollment utterances left");

    auto add = [&](const std::string &test_id, AttackCondition cond,
                   const std::optional<std::string> &prompt) {
      AttackTrial t;
      t.assignment = a;
      t.enrollment_utts = enrollment;
      t.test_utt = test_id;
      t.condition = cond;
      t.prompt_id = prompt;
      trials.push_back(std::move(t));
    };

    for (const auto &test_id : sel->second) {
      const UtteranceRecord *utt = manifest.FindUtterance(test_id);
      if (utt == nullptr)
        throw DataError("build_attack_trials: unknown test utterance '" + test_id + "'");
      add(test_id, AttackCondition::kGenuine, utt->prompt_id);
    }
    for (AttackCondition cond : {AttackCondition::kZeroEffort, AttackCondition::kMimicry}) {
      const Session session =
          cond == AttackCondition::kZeroEffort ? Session::kZeroEffort : Session::kMimicry;
      const auto utts = manifest.UtterancesOf(a.attacker_id, session);
      if (utts.empty())
        throw DataError("build_attack_trials: attacker '" + a.attacker_id +
                        "' has no " + ToString(session) + " session");
      for (const auto *utt : utts) add(utt->utterance_id, cond, utt->prompt_id);
    }
  }
  return trials;
}

inline std::string AssignmentKey(const TargetAssignment &a) {
  return a.attacker_id + "/" + ToString(a.rank_category) + "/" + a.target_id;
}

// A trial with its score; the flat row every analysis consumes.
struct ScoredTrial {
  std::string attacker_id;
  std::string target_id;
  RankCategory rank_category = RankCategory::kClosest;
  LanguagePool language_pool = LanguagePool::kNative;
  AttackCondition condition = AttackCondition::kZeroEffort;
  std::string test_utt;
  std::optional<std::string> prompt_id;
  double llr = 0.0;
  Hypothesis hypothesis = Hypothesis::kUnknown;
  DomainTag domain = DomainTag::kCrossDomain;
};

// Scores a trial set with one system.  Embeddings are raw i-vectors keyed by
// utterance id; enrollment vectors are averaged raw, then transformed.
inline std::vector<ScoredTrial> ScoreAttackTrials(
    const AttackTrialSet &trials, const std::map<std::string, Embedding> &embeddings,
    const BackendStack &backend) {
  PldaScorer scorer(backend.plda);
  auto raw = [&](const std::string &utt_id) -> const Embedding & {
    auto it = embeddings.find(utt_id);
    if (it == embeddings.end())
      throw DataError("score_attack_trials: no embedding for utterance '" + utt_id + "'");
    return it->second;
  };
  std::vector<ScoredTrial> out;
  out.reserve(trials.size());
  std::map<std::string, Eigen::VectorXd> enroll_cache;
  for (const auto &t : trials) {
    const std::string cache_key = AssignmentKey(t.assignment);
    auto it = enroll_cache.find(cache_key);
    if (it == enroll_cache.end()) {
      std::vector<Embedding> members;
      members.reserve(t.enrollment_utts.size());
      for (const auto &id : t.enrollment_utts) members.push_back(raw(id));
      it = enroll_cache.emplace(cache_key, backend.Transform(AverageEmbeddings(members).vector))
               .first;
    }
    ScoredTrial s;
    s.attacker_id = t.assignment.attacker_id;
    s.target_id = t.assignment.target_id;
    s.rank_category = t.assignment.rank_category;
    s.language_pool = t.assignment.language_pool;
    s.condition = t.condition;
    s.test_utt = t.test_utt;
    s.prompt_id = t.prompt_id;
    s.hypothesis = t.condition == AttackCondition::kGenuine ? Hypothesis::kTarget
                                                            : Hypothesis::kNontarget;
    s.domain = t.condition == AttackCondition::kGenuine ? DomainTag::kTargetDomain
                                                        : DomainTag::kCrossDomain;
    s.llr = scorer.PairLlr(it->second, backend.Transform(raw(t.test_utt).vector));
    out.push_back(std::move(s));
  }
  return out;
}

// Spearman rank correlation; ties get average ranks.
inline double SpearmanCorrelation(const std::vector<double> &a, const std::vector<double> &b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DataError("spearman: need two aligned series of length >= 2");
  auto ranks = [](const std::vector<double> &v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0) throw DataError("spearman: constant ranking");
  return num / std::sqrt(da * db);
}

struct AttackerTransfer {
  std::string attacker_id;
  std::map<RankCategory, double> category_mean_llr;  // attacked-profile means
  bool rank_order_preserved = false;  // closest > median > furthest
  double spearman = 0.0;              // between the two systems' full rankings
};

struct TransferReport {
  std::vector<AttackerTransfer> attackers;
  int preserved_count = 0;
  double spearman_median = 0.0;
};

/**
   Cross-system transfer: for each attacker, the attacked-profile mean LLR of
   its attack trials per rank category (zero-effort and mimicry conditions),
   whether the closest > median > furthest ordering survives, and the
   Spearman correlation between the two systems' full rankings of the shared
   target pool.
*/
inline TransferReport ComputeTransferReport(const std::vector<RankedTargets> &ranked_pub,
                                            const std::vector<RankedTargets> &ranked_black,
                                            const std::vector<ScoredTrial> &black_trials) {
  TransferReport report;
  std::vector<double> spearmans;
  for (const auto &ra : ranked_pub) {
    const RankedTargets *rb = nullptr;
    for (const auto &r : ranked_black)
      if (r.attacker_id == ra.attacker_id) rb = &r;
    if (rb == nullptr)
      throw DataError("transfer_report: attacked-profile ranking missing for attacker '" +
                      ra.attacker_id + "'");

    AttackerTransfer at;
    at.attacker_id = ra.attacker_id;
    std::map<RankCategory, std::pair<double, int>> acc;
    for (const auto &t : black_trials) {
      if (t.attacker_id != ra.attacker_id) continue;
      if (t.condition == AttackCondition::kGenuine) continue;
      auto &cell = acc[t.rank_category];
      cell.first += t.llr;
      cell.second += 1;
    }
    for (RankCategory cat :
         {RankCategory::kClosest, RankCategory::kMedian, RankCategory::kFurthest}) {
      auto it = acc.find(cat);
      if (it == acc.end())
        throw DataError("transfer_report: attacker '" + ra.attacker_id +
                        "' has no trials in category " + ToString(cat));
      at.category_mean_llr[cat] = it->second.first / it->second.second;
    }
    if (acc.count(RankCategory::kCommon))
      at.category_mean_llr[RankCategory::kCommon] =
          acc[RankCategory::kCommon].first / acc[RankCategory::kCommon].second;
    at.rank_order_preserved =
        at.category_mean_llr[RankCategory::kClosest] > at.category_mean_llr[RankCategory::kMedian] &&
        at.category_mean_llr[RankCategory::kMedian] > at.category_mean_llr[RankCategory::kFurthest];

    // align the two rankings on the shared target universe
    std::vector<double> sa, sb;
    for (const auto &e : ra.entries) {
      sa.push_back(e.score);
      sb.push_back(rb->ScoreOf(e.target_id));
    }
    at.spearman = SpearmanCorrelation(sa, sb);
    spearmans.push_back(at.spearman);
    report.preserved_count += at.rank_order_preserved ? 1 : 0;
    report.attackers.push_back(std::move(at));
  }
  if (!spearmans.empty()) {
    std::sort(spearmans.begin(), spearmans.end());
    const std::size_t n = spearmans.size();
    report.spearman_median =
        (n % 2 == 1) ? spearmans[n / 2] : 0.5 * (spearmans[n / 2 - 1] + spearmans[n / 2]);
  }
  return report;
}

}  // namespace asvmimic
