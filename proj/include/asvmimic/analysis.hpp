// asvmimic/analysis.hpp

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
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asvmimic/attack.hpp"
#include "asvmimic/common.hpp"
#include "asvmimic/manifest.hpp"

namespace asvmimic {

struct MeanCi {
  double mean = 0.0;
  double halfwidth = 0.0;
  int n = 0;
};

// Normal-approximation confidence interval around the mean, exactly as the
// paper's figures state it: z * std / sqrt(n) with z = 1.96 at 95%.
// Population standard deviation (the pinned value for {0,2} requires it).
inline MeanCi ComputeMeanCi(const std::vector<double> &values, double level = 0.95) {
  if (values.empty()) throw DataError("mean_ci: empty input");
  double z = 0.0;
  if (level == 0.95)
    z = 1.96;
  else if (level == 0.90)
    z = 1.6449;
  else if (level == 0.99)
    z = 2.5758;
  else
    throw DataError("mean_ci: unsupported confidence level");
  MeanCi out;
  out.n = static_cast<int>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(out.n);
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  var /= static_cast<double>(out.n);
  out.halfwidth = z * std::sqrt(var) / std::sqrt(static_cast<double>(out.n));
  return out;
}

struct CategorySummary {
  RankCategory rank_category = RankCategory::kClosest;
  LanguagePool language_pool = LanguagePool::kNative;
  AttackCondition condition = AttackCondition::kZeroEffort;
  double mean_llr = 0.0;
  double ci_halfwidth = 0.0;
  int n_trials = 0;
};

// One summary per (category x pool x condition) cell present in the data,
// in a fixed deterministic order.
inline std::vector<CategorySummary> SummarizeCategories(const std::vector<ScoredTrial> &trials) {
  std::map<std::tuple<int, int, int>, std::vector<double>> cells;
  for (const auto &t : trials)
    cells[{static_cast<int>(t.rank_category), static_cast<int>(t.language_pool),
           static_cast<int>(t.condition)}]
        .push_back(t.llr);
  std::vector<CategorySummary> out;
  for (const auto &[key, values] : cells) {
    const MeanCi ci = ComputeMeanCi(values);
    CategorySummary s;
    s.rank_category = static_cast<RankCategory>(std::get<0>(key));
    s.language_pool = static_cast<LanguagePool>(std::get<1>(key));
    s.condition = static_cast<AttackCondition>(std::get<2>(key));
    s.mean_llr = ci.mean;
    s.ci_halfwidth = ci.halfwidth;
    s.n_trials = ci.n;
    out.push_back(s);
  }
  return out;
}

struct MimicryDelta {
  RankCategory rank_category = RankCategory::kClosest;
  double delta_mean = 0.0;   // mimicry - zero_effort, over content-paired trials
  double ci_halfwidth = 0.0;
  int n_pairs = 0;
};

struct MimicryDeltaReport {
  std::vector<MimicryDelta> deltas;
  int unpaired_trials = 0;
};

// Pairs zero-effort and mimicry trials sharing (attacker, target, prompt),
// then averages the per-pair differences per rank category.  Trials without
// a counterpart (or without a prompt id) are excluded and counted.
inline MimicryDeltaReport ComputeMimicryDeltas(const std::vector<ScoredTrial> &trials) {
  struct Bucket {
    std::vector<std::pair<std::string, double>> zero, mimic;  // (test_utt, llr)
  };
  std::map<std::string, Bucket> buckets;
  std::map<std::string, RankCategory> bucket_category;
  MimicryDeltaReport report;
  for (const auto &t : trials) {
    if (t.condition == AttackCondition::kGenuine) continue;
    if (!t.prompt_id) {
      ++report.unpaired_trials;
      continue;
    }
    const std::string key =
        t.attacker_id + "/" + t.target_id + "/" + ToString(t.rank_category) + "/" + *t.prompt_id;
    bucket_category.emplace(key, t.rank_category);
    if (t.condition == AttackCondition::kZeroEffort)
      buckets[key].zero.emplace_back(t.test_utt, t.llr);
    else
      buckets[key].mimic.emplace_back(t.test_utt, t.llr);
  }
  std::map<int, std::vector<double>> per_category;
  for (auto &[key, bucket] : buckets) {
    std::sort(bucket.zero.begin(), bucket.zero.end());
    std::sort(bucket.mimic.begin(), bucket.mimic.end());
    const std::size_t paired = std::min(bucket.zero.size(), bucket.mimic.size());
    report.unpaired_trials +=
        static_cast<int>(bucket.zero.size() + bucket.mimic.size() - 2 * paired);
    for (std::size_t i = 0; i < paired; ++i)
      per_category[static_cast<int>(bucket_category.at(key))].push_back(
          bucket.mimic[i].second - bucket.zero[i].second);
  }
  for (const auto &[cat, diffs] : per_category) {
    const MeanCi ci = ComputeMeanCi(diffs);
    MimicryDelta d;
    d.rank_category = static_cast<RankCategory>(cat);
    d.delta_mean = ci.mean;
    d.ci_halfwidth = ci.halfwidth;
    d.n_pairs = ci.n;
    report.deltas.push_back(d);
  }
  return report;
}

// --- score-difference table (per-system rows, per-category columns) -------

struct DeltaTableRow {
  std::string system_label;
  // one (delta, ci) entry per category in closest/median/furthest/common order
  std::vector<std::pair<double, double>> cells;
};

// Fixed-width text rendering, one decimal place, columns in the published
// order.  Byte-stable, so reports can be diffed across runs.
inline std::string RenderDeltaTable(const std::vector<DeltaTableRow> &rows) {
  std::ostringstream os;
  auto pad = [&](const std::string &s, std::size_t width) {
    os << s;
    for (std::size_t i = s.size(); i < width; ++i) os << ' ';
  };
  const std::size_t label_width = 16, cell_width = 13;
  pad("ASV system", label_width);
  for (const char *h : {"Closest", "Median", "Furthest", "Common"}) pad(h, cell_width);
  os << "\n";
  for (const auto &row : rows) {
    pad(row.system_label, label_width);
    for (const auto &[delta, ci] : row.cells) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.1f +- %.1f", delta, ci);
      pad(buf, cell_width);
    }
    os << "\n";
  }
  return os.str();
}

// CSV with columns: system,category,delta_mean,ci_halfwidth.
inline std::vector<DeltaTableRow> ParseDeltaFixtureCsv(std::istream &in,
                                                       const std::string &origin) {
  std::vector<DeltaTableRow> rows;
  std::map<std::string, std::size_t> row_index;
  const std::vector<std::string> category_order = {"closest", "median", "furthest", "common"};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("system,", 0) == 0) continue;  // header
    const auto f = manifest_detail::SplitCsvLine(line);
    if (f.size() != 4) {
      std::ostringstream os;
      os << origin << ": line " << line_no << ": expected 4 columns";
      throw DataError(os.str());
    }
    auto it = row_index.find(f[0]);
    if (it == row_index.end()) {
      row_index[f[0]] = rows.size();
      rows.push_back({f[0], std::vector<std::pair<double, double>>(4, {0.0, 0.0})});
      it = row_index.find(f[0]);
    }
    const auto cat = std::find(category_order.begin(), category_order.end(), f[1]);
    if (cat == category_order.end())
      throw DataError(origin + ": unknown category '" + f[1] + "'");
    const std::size_t col = static_cast<std::size_t>(cat - category_order.begin());
    rows[it->second].cells[col] = {manifest_detail::ParseDouble(f[2], line_no, "delta_mean"),
                                   manifest_detail::ParseDouble(f[3], line_no, "ci")};
  }
  return rows;
}

// --- domain score distributions -------------------------------------------

struct DomainDistribution {
  DomainTag domain = DomainTag::kTargetDomain;
  Hypothesis hypothesis = Hypothesis::kTarget;
  std::vector<double> bin_edges;  // shared across all distributions
  std::vector<int> counts;
  double mean = 0.0;
  double stddev = 0.0;
  int n_trials = 0;
};

// Histograms over shared equal-width bins spanning the pooled score range,
// one distribution per (domain, hypothesis) pair present.
inline std::vector<DomainDistribution> ComputeDomainDistributions(
    const std::vector<ScoredTrial> &trials, int n_bins = 40) {
  if (trials.empty()) return {};
  double lo = trials.front().llr, hi = lo;
  for (const auto &t : trials) {
    lo = std::min(lo, t.llr);
    hi = std::max(hi, t.llr);
  }
  if (lo == hi) {  // all scores equal: widen so one interior bin holds them
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> edges(static_cast<std::size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i)
    edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / n_bins;

  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (const auto &t : trials)
    groups[{static_cast<int>(t.domain), static_cast<int>(t.hypothesis)}].push_back(t.llr);

  std::vector<DomainDistribution> out;
  for (const auto &[key, values] : groups) {
    DomainDistribution d;
    d.domain = static_cast<DomainTag>(key.first);
    d.hypothesis = static_cast<Hypothesis>(key.second);
    d.bin_edges = edges;
    d.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (double v : values) {
      int bin = static_cast<int>((v - lo) / (hi - lo) * n_bins);
      bin = std::clamp(bin, 0, n_bins - 1);
      ++d.counts[static_cast<std::size_t>(bin)];
    }
    d.n_trials = static_cast<int>(values.size());
    for (double v : values) d.mean += v;
    d.mean /= static_cast<double>(values.size());
    for (double v : values) d.stddev += (v - d.mean) * (v - d.mean);
    d.stddev = std::sqrt(d.stddev / static_cast<double>(values.size()));
    out.push_back(std::move(d));
  }
  return out;
}

// --- listening-test trial generation ---------------------------------------

enum class ListeningGroup {
  kTargetVsTarget,
  kTargetVsZeroEffort,
  kTargetVsMimicry,
  kAttackerVsZeroEffort,
  kAttackerVsMimicry,
};

inline std::string ToString(ListeningGroup g) {
  switch (g) {
    case ListeningGroup::kTargetVsTarget: return "target_vs_target";
    case ListeningGroup::kTargetVsZeroEffort: return "target_vs_zero_effort";
    case ListeningGroup::kTargetVsMimicry: return "target_vs_mimicry";
    case ListeningGroup::kAttackerVsZeroEffort: return "attacker_vs_zero_effort";
    default: return "attacker_vs_mimicry";
  }
}

struct ListeningTrial {
  std::string trial_id;
  ListeningGroup group = ListeningGroup::kTargetVsTarget;
  std::string sample_a;  // presented first
  std::string sample_b;
  std::uint64_t presentation_order_seed = 0;
};

/**
   Builds the five listening-trial groups: per attacker-target combination,
   per_combination content triplets are drawn; the first three groups share
   one target enrollment utterance per triplet (chosen closest in duration to
   the test utterances) and test utterances sharing the same prompt, the last
   two compare the attacker's natural enrollment against the zero-effort and
   mimicry takes.  Within-trial presentation order and the global trial order
   are seeded-random, so a fixed seed reproduces the list byte for byte.
*/
inline std::vector<ListeningTrial> GenerateListeningTrials(
    const Manifest &manifest, const std::vector<TargetAssignment> &assignments,
    int per_combination, std::uint64_t seed) {
  if (per_combination < 1) throw DataError("listening trials: per_combination must be >= 1");
  std::mt19937_64 rng(seed);
  struct Raw {
    ListeningGroup group;
    std::string enroll, test;
  };
  std::vector<Raw> raw;

  for (const auto &a : assignments) {
    auto by_prompt = [&](const std::string &speaker, Session session) {
      std::map<std::string, std::vector<const UtteranceRecord *>> m;
      for (const auto *u : manifest.UtterancesOf(speaker, session))
        if (u->prompt_id) m[*u->prompt_id].push_back(u);
      return m;
    };
    auto zero = by_prompt(a.attacker_id, Session::kZeroEffort);
    auto mimic = by_prompt(a.attacker_id, Session::kMimicry);
    auto wild = by_prompt(a.target_id, Session::kWild);

    std::vector<std::string> prompts;
    for (const auto &[p, utts] : zero)
      if (mimic.count(p) && wild.count(p)) prompts.push_back(p);
    std::sort(prompts.begin(), prompts.end());
    if (static_cast<int>(prompts.size()) < per_combination)
      throw DataError("listening trials: combination " + a.attacker_id + "/" + a.target_id +
                      " has only " + std::to_string(prompts.size()) +
                      " shared prompts, need " + std::to_string(per_combination));
    prompts.resize(static_cast<std::size_t>(per_combination));

    for (const auto &p : prompts) {
      const UtteranceRecord *t_test = wild.at(p).front();
      const UtteranceRecord *z_test = zero.at(p).front();
      const UtteranceRecord *m_test = mimic.at(p).front();
      const double want_duration =
          (t_test->duration_s + z_test->duration_s + m_test->duration_s) / 3.0;

      auto closest_duration = [&](const std::vector<const UtteranceRecord *> &pool,
                                  const std::string &exclude) -> const UtteranceRecord * {
        const UtteranceRecord *best = nullptr;
        for (const auto *u : pool) {
          if (u->utterance_id == exclude) continue;
          if (best == nullptr ||
              std::fabs(u->duration_s - want_duration) <
                  std::fabs(best->duration_s - want_duration) ||
              (std::fabs(u->duration_s - want_duration) ==
                   std::fabs(best->duration_s - want_duration) &&
               u->utterance_id < best->utterance_id))
            best = u;
        }
        return best;
      };

      const UtteranceRecord *t_enroll =
          closest_duration(manifest.UtterancesOf(a.target_id, Session::kWild),
                           t_test->utterance_id);
      if (t_enroll == nullptr)
        throw DataError("listening trials: target '" + a.target_id +
                        "' lacks an enrollment utterance");
      const UtteranceRecord *a_enroll =
          closest_duration(manifest.UtterancesOf(a.attacker_id, Session::kNatural), "");
      if (a_enroll == nullptr)
        throw DataError("listening trials: attacker '" + a.attacker_id +
                        "' lacks a natural-session utterance");

      raw.push_back({ListeningGroup::kTargetVsTarget, t_enroll->utterance_id, t_test->utterance_id});
      raw.push_back({ListeningGroup::kTargetVsZeroEffort, t_enroll->utterance_id, z_test->utterance_id});
      raw.push_back({ListeningGroup::kTargetVsMimicry, t_enroll->utterance_id, m_test->utterance_id});
      raw.push_back({ListeningGroup::kAttackerVsZeroEffort, a_enroll->utterance_id, z_test->utterance_id});
      raw.push_back({ListeningGroup::kAttackerVsMimicry, a_enroll->utterance_id, m_test->utterance_id});
    }
  }

  std::shuffle(raw.begin(), raw.end(), rng);
  std::vector<ListeningTrial> trials;
  trials.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    ListeningTrial t;
    char id[16];
    std::snprintf(id, sizeof(id), "lt%05zu", i + 1);
    t.trial_id = id;
    t.group = raw[i].group;
    t.presentation_order_seed = rng();
    const bool swap = (t.presentation_order_seed & 1) != 0;
    t.sample_a = swap ? raw[i].test : raw[i].enroll;
    t.sample_b = swap ? raw[i].enroll : raw[i].test;
    trials.push_back(std::move(t));
  }
  return trials;
}

// --- prosody change report --------------------------------------------------

struct ProsodyCell {
  double speaking_rate = 0.0;
  double f0_median = 0.0;
  double f0_std = 0.0;
};

struct ProsodyPair {
  std::string attacker_id;
  std::string target_id;
  ProsodyCell natural, mimicry, target;
  double formant_d_natural = 0.0;  // d(attacker natural, target)
  double formant_d_mimicry = 0.0;  // d(attacker mimicry, target)
};

struct ProsodyChangeRow {
  std::string attacker_id;
  std::string target_id;
  std::string parameter;  // rate | f0_median | f0_std | formant_d
  double natural_distance = 0.0;
  double mimicry_distance = 0.0;
  bool improved = false;  // strictly closer after mimicry
};

// Distance-to-target before and after mimicry for each broad parameter; the
// improvement flag uses strict inequality (ties are not improvements).
inline std::vector<ProsodyChangeRow> ComputeProsodyReport(const std::vector<ProsodyPair> &pairs) {
  std::vector<ProsodyChangeRow> rows;
  for (const auto &p : pairs) {
    auto add = [&](const char *name, double nat_dist, double mim_dist) {
      ProsodyChangeRow r;
      r.attacker_id = p.attacker_id;
      r.target_id = p.target_id;
      r.parameter = name;
      r.natural_distance = nat_dist;
      r.mimicry_distance = mim_dist;
      r.improved = mim_dist < nat_dist;
      rows.push_back(std::move(r));
    };
    add("rate", std::fabs(p.natural.speaking_rate - p.target.speaking_rate),
        std::fabs(p.mimicry.speaking_rate - p.target.speaking_rate));
    add("f0_median", std::fabs(p.natural.f0_median - p.target.f0_median),
        std::fabs(p.mimicry.f0_median - p.target.f0_median));
    add("f0_std", std::fabs(p.natural.f0_std - p.target.f0_std),
        std::fabs(p.mimicry.f0_std - p.target.f0_std));
    add("formant_d", p.formant_d_natural, p.formant_d_mimicry);
  }
  return rows;
}

// --- scored-trial CSV --------------------------------------------------------

inline constexpr const char *kScoredTrialHeader =
    "attacker_id,target_id,rank_category,language_pool,condition,test_utt,prompt_id,"
    "llr,hypothesis,domain";

inline void WriteScoredTrialsCsv(std::ostream &os, const std::vector<ScoredTrial> &trials) {
  os << kScoredTrialHeader << "\n";
  char buf[32];
  for (const auto &t : trials) {
    std::snprintf(buf, sizeof(buf), "%.17g", t.llr);
    os << t.attacker_id << ',' << t.target_id << ',' << ToString(t.rank_category) << ','
       << ToString(t.language_pool) << ',' << ToString(t.condition) << ',' << t.test_utt << ','
       << (t.prompt_id ? *t.prompt_id : "") << ',' << buf << ',' << ToString(t.hypothesis)
       << ',' << ToString(t.domain) << "\n";
  }
}

inline std::vector<ScoredTrial> ReadScoredTrialsCsv(std::istream &in, const std::string &origin) {
  std::vector<ScoredTrial> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("attacker_id,", 0) == 0) continue;
    const auto f = manifest_detail::SplitCsvLine(line);
    if (f.size() != 10) {
      std::ostringstream os;
      os << origin << ": line " << line_no << ": expected 10 columns, got " << f.size();
      throw DataError(os.str());
    }
    ScoredTrial t;
    t.attacker_id = f[0];
    t.target_id = f[1];
    t.rank_category = ParseRankCategory(f[2]);
    t.language_pool = ParseLanguagePool(f[3]);
    t.condition = ParseAttackCondition(f[4]);
    t.test_utt = f[5];
    if (!f[6].empty()) t.prompt_id = f[6];
    t.llr = manifest_detail::ParseDouble(f[7], line_no, "llr");
    t.hypothesis = ParseHypothesis(f[8]);
    t.domain = ParseDomainTag(f[9]);
    out.push_back(std::move(t));
  }
  return out;
}

// --- JSON emitters -----------------------------------------------------------

inline nlohmann::json ToJson(const std::vector<CategorySummary> &summaries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto &s : summaries)
    arr.push_back({{"rank_category", ToString(s.rank_category)},
                   {"language_pool", ToString(s.language_pool)},
                   {"condition", ToString(s.condition)},
                   {"mean_llr", s.mean_llr},
                   {"ci_halfwidth", s.ci_halfwidth},
                   {"n_trials", s.n_trials}});
  return arr;
}

inline nlohmann::json ToJson(const MimicryDeltaReport &report) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto &d : report.deltas)
    arr.push_back({{"rank_category", ToString(d.rank_category)},
                   {"delta_mean", d.delta_mean},
                   {"ci_halfwidth", d.ci_halfwidth},
                   {"n_pairs", d.n_pairs}});
  return {{"deltas", arr}, {"unpaired_trials", report.unpaired_trials}};
}

inline nlohmann::json ToJson(const std::vector<DomainDistribution> &dists) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto &d : dists)
    arr.push_back({{"domain", ToString(d.domain)},
                   {"hypothesis", ToString(d.hypothesis)},
                   {"bin_edges", d.bin_edges},
                   {"counts", d.counts},
                   {"mean", d.mean},
                   {"stddev", d.stddev},
                   {"n_trials", d.n_trials}});
  return arr;
}

inline nlohmann::json ToJson(const TransferReport &report) {
  nlohmann::json attackers = nlohmann::json::array();
  for (const auto &a : report.attackers) {
    nlohmann::json means;
    for (const auto &[cat, mean] : a.category_mean_llr) means[ToString(cat)] = mean;
    attackers.push_back({{"attacker_id", a.attacker_id},
                         {"category_mean_llr", means},
                         {"rank_order_preserved", a.rank_order_preserved},
                         {"spearman", a.spearman}});
  }
  return {{"attackers", attackers},
          {"preserved_count", report.preserved_count},
          {"spearman_median", report.spearman_median}};
}

inline nlohmann::json ToJson(const std::vector<ProsodyChangeRow> &rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto &r : rows)
    arr.push_back({{"attacker_id", r.attacker_id},
                   {"target_id", r.target_id},
                   {"parameter", r.parameter},
                   {"natural_distance", r.natural_distance},
                   {"mimicry_distance", r.mimicry_distance},
                   {"improved", r.improved}});
  return arr;
}

}  // namespace asvmimic
