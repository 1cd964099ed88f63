// tools/asvmimic.cpp

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

// Command-line surface of the toolkit: corpus synthesis, system training,
// embedding extraction, target ranking and selection, attack scoring,
// transfer reporting, prosody analysis, listening-trial generation, and the
// consolidated report bundle.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "asvmimic/analysis.hpp"
#include "asvmimic/attack.hpp"
#include "asvmimic/config.hpp"
#include "asvmimic/dtw.hpp"
#include "asvmimic/eer.hpp"
#include "asvmimic/formant.hpp"
#include "asvmimic/pipeline.hpp"
#include "asvmimic/pitch.hpp"
#include "asvmimic/rate.hpp"
#include "asvmimic/synth.hpp"

namespace {

using namespace asvmimic;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::string store_root;
  int jobs = 2;
  bool deterministic = false;
  std::uint64_t seed = 7;

  RunConfig LoadConfig() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::LoadFile(config_path);
    return cfg;
  }
  ArtifactStore OpenStore() const {
    std::string root = store_root;
    if (root.empty()) root = ArtifactStore::ResolveRoot("store");
    return ArtifactStore(root);
  }
};

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --- persisted CSV side tables ----------------------------------------------

void WriteRankingCsv(const std::string &path, const RankedTargets &ranked) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write ranking: " + path);
  os << "attacker_id,target_id,score,rank,filter_tag\n";
  for (std::size_t i = 0; i < ranked.entries.size(); ++i)
    os << ranked.attacker_id << ',' << ranked.entries[i].target_id << ','
       << FormatDouble(ranked.entries[i].score) << ',' << i + 1 << ',' << ranked.filter_tag
       << "\n";
}

RankedTargets ReadRankingCsv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ranking: " + path);
  RankedTargets ranked;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("attacker_id,", 0) == 0) continue;
    const auto f = manifest_detail::SplitCsvLine(line);
    if (f.size() != 5) throw DataError(path + ": line " + std::to_string(line_no) + ": bad row");
    ranked.attacker_id = f[0];
    ranked.filter_tag = f[4];
    ranked.entries.push_back({f[1], manifest_detail::ParseDouble(f[2], line_no, "score")});
  }
  if (ranked.entries.empty()) throw DataError(path + ": empty ranking");
  return ranked;
}

void WriteAssignmentsCsv(std::ostream &os, const std::vector<TargetAssignment> &assignments) {
  os << "attacker_id,rank_category,target_id,language_pool\n";
  for (const auto &a : assignments)
    os << a.attacker_id << ',' << ToString(a.rank_category) << ',' << a.target_id << ','
       << ToString(a.language_pool) << "\n";
}

std::vector<TargetAssignment> ReadAssignmentsCsv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open assignments: " + path);
  std::vector<TargetAssignment> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("attacker_id,", 0) == 0) continue;
    const auto f = manifest_detail::SplitCsvLine(line);
    if (f.size() != 4)
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected 4 columns");
    TargetAssignment a;
    a.attacker_id = f[0];
    a.rank_category = ParseRankCategory(f[1]);
    a.target_id = f[2];
    a.language_pool = ParseLanguagePool(f[3]);
    out.push_back(a);
  }
  return out;
}

void WriteSelectionsCsv(std::ostream &os,
                        const std::map<std::string, std::vector<std::string>> &selections) {
  os << "assignment_key,order,utterance_id\n";
  for (const auto &[key, utts] : selections)
    for (std::size_t i = 0; i < utts.size(); ++i)
      os << key << ',' << i + 1 << ',' << utts[i] << "\n";
}

std::map<std::string, std::vector<std::string>> ReadSelectionsCsv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open selections: " + path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("assignment_key,", 0) == 0) continue;
    const auto f = manifest_detail::SplitCsvLine(line);
    if (f.size() != 3)
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected 3 columns");
    out[f[0]].push_back(f[2]);
  }
  return out;
}

void WriteUttInfoCsv(const std::string &path, const std::vector<UtteranceInfo> &info) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write utterance info: " + path);
  os << "utterance_id,active_speech_s,duration_s\n";
  for (const auto &row : info)
    os << row.utterance_id << ',' << FormatDouble(row.active_speech_s) << ','
       << FormatDouble(row.duration_s) << "\n";
}

std::map<std::string, UtteranceInfo> ReadUttInfoCsv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open utterance info: " + path);
  std::map<std::string, UtteranceInfo> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("utterance_id,", 0) == 0) continue;
    const auto f = manifest_detail::SplitCsvLine(line);
    if (f.size() != 3)
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected 3 columns");
    UtteranceInfo row;
    row.utterance_id = f[0];
    row.active_speech_s = manifest_detail::ParseDouble(f[1], line_no, "active_speech_s");
    row.duration_s = manifest_detail::ParseDouble(f[2], line_no, "duration_s");
    out[row.utterance_id] = row;
  }
  return out;
}

void WriteEmbeddingsCsv(const std::string &path, const std::map<std::string, Embedding> &embs) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write embeddings: " + path);
  if (embs.empty()) return;
  os << "utterance_id";
  for (Eigen::Index j = 0; j < embs.begin()->second.vector.size(); ++j) os << ",e" << j;
  os << "\n";
  for (const auto &[id, emb] : embs) {
    os << id;
    for (Eigen::Index j = 0; j < emb.vector.size(); ++j) os << ',' << FormatDouble(emb.vector(j));
    os << "\n";
  }
}

std::map<std::string, Embedding> LoadStoredEmbeddings(const ArtifactStore &store,
                                                      const Manifest &manifest,
                                                      const std::string &profile_id) {
  std::map<std::string, Embedding> out;
  for (const auto &utt : manifest.utterances) {
    const std::string key = StoreKeyEmbedding(profile_id, utt.utterance_id);
    if (!store.Has(key))
      throw DataError("store has no embedding for '" + utt.utterance_id + "' under profile '" +
                      profile_id + "' (run `asvmimic extract` first)");
    out.emplace(utt.utterance_id, store.Get<Embedding>(key));
  }
  return out;
}

std::function<bool(const SpeakerRecord &)> MakeFilter(const std::string &spec,
                                                      std::string *tag) {
  *tag = spec;
  if (spec == "all" || spec.empty()) {
    *tag = "all";
    return [](const SpeakerRecord &) { return true; };
  }
  if (spec.rfind("nat=", 0) == 0) {
    const std::string nat = spec.substr(4);
    return [nat](const SpeakerRecord &s) { return s.nationality == nat; };
  }
  if (spec.rfind("nat!=", 0) == 0) {
    const std::string nat = spec.substr(5);
    return [nat](const SpeakerRecord &s) { return s.nationality != nat; };
  }
  throw DataError("unknown filter spec '" + spec + "' (use all | nat=XX | nat!=XX)");
}

// --- subcommand bodies --------------------------------------------------------

int CmdSynthCorpus(const GlobalOptions &g, const std::string &out_dir, int speakers,
                   int attackers, int utts, int prompts, double native_fraction) {
  SynthOptions so;
  so.num_speakers = speakers;
  so.num_attackers = attackers;
  so.utterances_per_target = utts;
  so.prompts = prompts;
  so.native_fraction = native_fraction;
  so.seed = g.seed;
  auto result = GenerateSyntheticCorpus(out_dir, so);
  Log("synth-corpus: wrote " + std::to_string(result.manifest.utterances.size()) +
      " utterances for " + std::to_string(result.manifest.speakers.size()) + " speakers");
  std::cout << result.manifest_path << "\n";
  return 0;
}

int CmdTrain(const GlobalOptions &g, const std::string &manifest_path,
             const std::string &profile_id) {
  const RunConfig cfg = g.LoadConfig();
  const SystemProfile profile = cfg.Profile(profile_id);
  const Manifest manifest = LoadManifest(manifest_path);
  const std::string audio_root = fs::path(manifest_path).parent_path().string();
  const ArtifactStore store = g.OpenStore();
  std::vector<TrainingLogEntry> log;
  const TrainedSystem sys = TrainProfile(manifest, profile, audio_root, g.jobs, &log);
  SaveTrainedSystem(store, sys);
  Log("train: profile '" + profile_id + "' done, " + std::to_string(log.size()) +
      " logged iterations, artifacts stored under " + store.root());
  return 0;
}

int CmdExtract(const GlobalOptions &g, const std::string &manifest_path,
               const std::string &profile_id, const std::string &csv_out) {
  const RunConfig cfg = g.LoadConfig();
  const SystemProfile profile = cfg.Profile(profile_id);
  const Manifest manifest = LoadManifest(manifest_path);
  const std::string audio_root = fs::path(manifest_path).parent_path().string();
  const ArtifactStore store = g.OpenStore();
  const TrainedSystem sys = LoadTrainedSystem(store, profile);
  const ExtractionResult result = ExtractAll(manifest, sys, audio_root, g.jobs);
  for (const auto &[utt_id, emb] : result.embeddings)
    store.Put(StoreKeyEmbedding(profile_id, utt_id), emb);
  WriteUttInfoCsv((fs::path(store.root()) / ("uttinfo_" + profile_id + ".csv")).string(),
                  result.info);
  if (!csv_out.empty()) WriteEmbeddingsCsv(csv_out, result.embeddings);
  Log("extract: " + std::to_string(result.embeddings.size()) + " embeddings for profile '" +
      profile_id + "'");
  return 0;
}

int CmdRank(const GlobalOptions &g, const std::string &manifest_path,
            const std::string &profile_id, const std::string &attacker_id,
            const std::string &filter_spec, const std::string &pool_name,
            const std::string &ranking_out, const std::string &assign_out,
            const std::string &common_target) {
  const RunConfig cfg = g.LoadConfig();
  const SystemProfile profile = cfg.Profile(profile_id);
  const Manifest manifest = LoadManifest(manifest_path);
  const ArtifactStore store = g.OpenStore();
  const TrainedSystem sys = LoadTrainedSystem(store, profile);
  const auto embeddings = LoadStoredEmbeddings(store, manifest, profile_id);

  const SpeakerRecord *attacker = manifest.FindSpeaker(attacker_id);
  if (attacker == nullptr || attacker->role != Role::kAttacker)
    throw DataError("unknown attacker '" + attacker_id + "'");

  const auto natural = PoolSpeakerEmbeddings(manifest, embeddings, Session::kNatural);
  if (!natural.count(attacker_id))
    throw DataError("attacker '" + attacker_id + "' has no natural-session embeddings");
  const auto pooled = PoolSpeakerEmbeddings(manifest, embeddings, Session::kWild);
  std::vector<std::pair<const SpeakerRecord *, Embedding>> pool;
  for (const auto &spk : manifest.speakers) {
    if (spk.role != Role::kTarget) continue;
    auto it = pooled.find(spk.speaker_id);
    if (it != pooled.end()) pool.push_back({&spk, it->second});
  }
  std::string tag;
  const auto filter = MakeFilter(filter_spec, &tag);
  const RankedTargets ranked =
      RankTargets(attacker_id, natural.at(attacker_id), pool, filter, sys.backend, tag);

  const LanguagePool lang_pool = ParseLanguagePool(pool_name);
  std::vector<TargetAssignment> assignments = SelectTargets(ranked, lang_pool);
  if (!common_target.empty()) {
    if (manifest.FindSpeaker(common_target) == nullptr)
      throw DataError("common target '" + common_target + "' not in manifest");
    TargetAssignment c;
    c.attacker_id = attacker_id;
    c.rank_category = RankCategory::kCommon;
    c.target_id = common_target;
    c.language_pool = lang_pool;
    assignments.push_back(c);
  }

  WriteRankingCsv(ranking_out, ranked);
  std::ofstream os(assign_out);
  if (!os) throw DataError("cannot write assignments: " + assign_out);
  WriteAssignmentsCsv(os, assignments);
  std::cout << attacker_id << " closest=" << assignments[0].target_id
            << " median=" << assignments[1].target_id
            << " furthest=" << assignments[2].target_id << "\n";
  return 0;
}

int CmdSelectUtterances(const GlobalOptions &g, const std::string &manifest_path,
                        const std::string &profile_id, const std::string &assign_path,
                        const std::string &out_path, double min_active_s) {
  const RunConfig cfg = g.LoadConfig();
  const SystemProfile profile = cfg.Profile(profile_id);
  const Manifest manifest = LoadManifest(manifest_path);
  const ArtifactStore store = g.OpenStore();
  const TrainedSystem sys = LoadTrainedSystem(store, profile);
  const auto embeddings = LoadStoredEmbeddings(store, manifest, profile_id);
  const auto info =
      ReadUttInfoCsv((fs::path(store.root()) / ("uttinfo_" + profile_id + ".csv")).string());
  const auto assignments = ReadAssignmentsCsv(assign_path);
  const auto natural = PoolSpeakerEmbeddings(manifest, embeddings, Session::kNatural);

  PldaScorer scorer(sys.backend.plda);
  std::map<std::string, std::vector<std::string>> selections;
  for (const auto &a : assignments) {
    auto nat_it = natural.find(a.attacker_id);
    if (nat_it == natural.end())
      throw DataError("attacker '" + a.attacker_id + "' has no natural-session embeddings");
    const Eigen::VectorXd attacker_vec = sys.backend.Transform(nat_it->second.vector);
    std::vector<UtteranceCandidate> candidates;
    for (const auto *utt : manifest.UtterancesOf(a.target_id)) {
      UtteranceCandidate c;
      c.utterance_id = utt->utterance_id;
      c.quality_ok = utt->quality_ok;
      auto info_it = info.find(utt->utterance_id);
      c.active_speech_s = info_it != info.end() ? info_it->second.active_speech_s : 0.0;
      c.score = scorer.PairLlr(
          sys.backend.Transform(embeddings.at(utt->utterance_id).vector), attacker_vec);
      candidates.push_back(std::move(c));
    }
    selections[AssignmentKey(a)] =
        SelectUtterances(a.rank_category, std::move(candidates), min_active_s);
  }
  std::ofstream os(out_path);
  if (!os) throw DataError("cannot write selections: " + out_path);
  WriteSelectionsCsv(os, selections);
  Log("select-utterances: " + std::to_string(selections.size()) + " assignments");
  return 0;
}

int CmdAttack(const GlobalOptions &g, const std::string &manifest_path,
              const std::string &profile_id, const std::string &assign_path,
              const std::string &select_path, const std::string &scores_out,
              const std::string &summary_out) {
  const RunConfig cfg = g.LoadConfig();
  const SystemProfile profile = cfg.Profile(profile_id);
  const Manifest manifest = LoadManifest(manifest_path);
  const ArtifactStore store = g.OpenStore();
  const TrainedSystem sys = LoadTrainedSystem(store, profile);
  const auto embeddings = LoadStoredEmbeddings(store, manifest, profile_id);
  const auto assignments = ReadAssignmentsCsv(assign_path);
  if (assignments.empty()) {
    std::ofstream os(scores_out);
    WriteScoredTrialsCsv(os, {});
    if (!summary_out.empty()) {
      std::ofstream js(summary_out);
      js << nlohmann::json({{"schema", "asvmimic.summary.v1"},
                            {"categories", nlohmann::json::array()}})
                .dump(2)
         << "\n";
    }
    Warn("attack: empty assignment file, wrote empty outputs");
    return 0;
  }
  const auto selections = ReadSelectionsCsv(select_path);
  const AttackTrialSet trials = BuildAttackTrials(assignments, manifest, selections);
  const auto scored = ScoreAttackTrials(trials, embeddings, sys.backend);
  std::ofstream os(scores_out);
  if (!os) throw DataError("cannot write scores: " + scores_out);
  WriteScoredTrialsCsv(os, scored);
  if (!summary_out.empty()) {
    std::ofstream js(summary_out);
    if (!js) throw DataError("cannot write summary: " + summary_out);
    js << nlohmann::json({{"schema", "asvmimic.summary.v1"},
                          {"categories", ToJson(SummarizeCategories(scored))}})
              .dump(2)
       << "\n";
  }
  Log("attack: scored " + std::to_string(scored.size()) + " trials");
  return 0;
}

int CmdTransferReport(const std::vector<std::string> &rankings_a,
                      const std::vector<std::string> &rankings_b,
                      const std::string &scores_path, const std::string &out_path) {
  std::vector<RankedTargets> ranked_a, ranked_b;
  for (const auto &p : rankings_a) ranked_a.push_back(ReadRankingCsv(p));
  for (const auto &p : rankings_b) ranked_b.push_back(ReadRankingCsv(p));
  std::ifstream in(scores_path);
  if (!in) throw DataError("cannot open scores: " + scores_path);
  const auto scored = ReadScoredTrialsCsv(in, scores_path);
  const TransferReport report = ComputeTransferReport(ranked_a, ranked_b, scored);
  nlohmann::json j = ToJson(report);
  j["schema"] = "asvmimic.transfer.v1";
  std::ofstream os(out_path);
  if (!os) throw DataError("cannot write transfer report: " + out_path);
  os << j.dump(2) << "\n";
  std::cout << "preserved " << report.preserved_count << "/" << report.attackers.size()
            << " spearman_median " << report.spearman_median << "\n";
  return 0;
}

struct ProsodyPairRow {
  std::string attacker_id, target_id, condition, utt_a, utt_b, status;
  double d_hz = 0.0;
  int frames_used = 0;
  double mean_cost = 0.0;
};

int CmdProsody(const GlobalOptions &g, const std::string &manifest_path,
               const std::string &assign_path, const std::string &out_prefix) {
  const Manifest manifest = LoadManifest(manifest_path);
  const std::string audio_root = fs::path(manifest_path).parent_path().string();
  const auto assignments = ReadAssignmentsCsv(assign_path);

  // per-utterance prosody statistics for every utterance we will touch
  std::set<std::string> wanted;
  std::vector<std::tuple<std::string, std::string, std::string, std::string, std::string>>
      pairs;  // attacker, target, condition, utt_a(attacker side), utt_b(target side)
  for (const auto &a : assignments) {
    auto zero = manifest.UtterancesOf(a.attacker_id, Session::kZeroEffort);
    auto mimic = manifest.UtterancesOf(a.attacker_id, Session::kMimicry);
    auto wild = manifest.UtterancesOf(a.target_id, Session::kWild);
    std::map<std::string, const UtteranceRecord *> wild_by_prompt;
    for (const auto *u : wild)
      if (u->prompt_id) wild_by_prompt.emplace(*u->prompt_id, u);
    auto add_pairs = [&](const std::vector<const UtteranceRecord *> &utts,
                         const char *condition) {
      for (const auto *u : utts) {
        if (!u->prompt_id) continue;
        auto it = wild_by_prompt.find(*u->prompt_id);
        if (it == wild_by_prompt.end()) continue;
        pairs.emplace_back(a.attacker_id, a.target_id, condition, u->utterance_id,
                           it->second->utterance_id);
        wanted.insert(u->utterance_id);
        wanted.insert(it->second->utterance_id);
      }
    };
    add_pairs(zero, "zero_effort");
    add_pairs(mimic, "mimicry");
  }
  const std::vector<std::string> utt_list(wanted.begin(), wanted.end());

  struct UttProsody {
    double f0_median = 0.0, f0_std = 0.0, rate = 0.0, phonation_s = 0.0;
    bool voiced = false;
    FormantTrack formants;
    FeatureMatrix align_features;
  };
  FrontendConfig align_frontend = PublicProfile().frontend;  // MFCCs without deltas for DTW
  align_frontend.include_deltas = false;
  align_frontend.rasta = false;

  auto prosody_rows = ParallelMap<UttProsody>(utt_list.size(), g.jobs, [&](std::size_t i) {
    const UtteranceRecord *utt = manifest.FindUtterance(utt_list[i]);
    const fs::path p = fs::path(utt->audio_path).is_absolute()
                           ? fs::path(utt->audio_path)
                           : fs::path(audio_root) / utt->audio_path;
    AudioBuffer audio = ReadWav(p.string());
    if (audio.sample_rate_hz != 16000) audio = Resample(audio, 16000);
    UttProsody row;
    const SpeakerRecord *spk = manifest.FindSpeaker(utt->speaker_id);
    const PitchConfig pc = spk->gender == Gender::kFemale ? FemalePitchConfig()
                            : spk->gender == Gender::kMale ? MalePitchConfig()
                                                           : DefaultPitchConfig();
    try {
      const auto summary = SummarizeF0(TrackF0(audio, pc));
      row.f0_median = summary.median_hz;
      row.f0_std = summary.std_hz;
      row.voiced = true;
    } catch (const DataError &) {
      row.voiced = false;  // fully unvoiced utterance; flagged downstream
    }
    const auto rate = EstimateSpeakingRate(audio);
    row.rate = rate.syllables_per_second;
    row.phonation_s = rate.phonation_time_s;
    row.formants = ExtractFormants(audio);
    FeatureMatrix feat = ComputeMfcc(audio, align_frontend);
    feat.speech_flags = SadEnergy(audio, align_frontend);
    row.align_features = Cmvn(feat);
    return row;
  });
  std::map<std::string, const UttProsody *> prosody;
  for (std::size_t i = 0; i < utt_list.size(); ++i)
    prosody.emplace(utt_list[i], &prosody_rows[i]);

  // per-utterance stats table
  {
    std::ofstream os(out_prefix + "_utts.csv");
    if (!os) throw DataError("cannot write prosody stats: " + out_prefix + "_utts.csv");
    os << "utterance_id,speaker_id,session,f0_median,f0_std,rate,phonation_s,voiced\n";
    for (const auto &id : utt_list) {
      const UtteranceRecord *utt = manifest.FindUtterance(id);
      const UttProsody &row = *prosody.at(id);
      os << id << ',' << utt->speaker_id << ',' << ToString(utt->session) << ','
         << FormatDouble(row.f0_median) << ',' << FormatDouble(row.f0_std) << ','
         << FormatDouble(row.rate) << ',' << FormatDouble(row.phonation_s) << ','
         << (row.voiced ? 1 : 0) << "\n";
    }
  }

  // aligned formant differences per pair
  constexpr double kRejectMeanCost = 0.6;
  std::vector<ProsodyPairRow> rows;
  for (const auto &[attacker, target, condition, utt_a, utt_b] : pairs) {
    ProsodyPairRow row;
    row.attacker_id = attacker;
    row.target_id = target;
    row.condition = condition;
    row.utt_a = utt_a;
    row.utt_b = utt_b;
    const UttProsody &pa = *prosody.at(utt_a);
    const UttProsody &pb = *prosody.at(utt_b);
    try {
      const DtwResult dtw = DtwAlign(pa.align_features, pb.align_features);
      row.mean_cost = dtw.MeanStepCost();
      if (row.mean_cost > kRejectMeanCost) {
        row.status = "rejected_misaligned";
      } else {
        const auto diff = ComputeFormantDifference(pa.formants, pb.formants, dtw.path);
        row.d_hz = diff.d_hz;
        row.frames_used = diff.frames_used;
        row.status = "ok";
      }
    } catch (const DataError &e) {
      row.status = "unreliable";
      Warn(std::string("prosody: ") + utt_a + " vs " + utt_b + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  {
    std::ofstream os(out_prefix + "_pairs.csv");
    if (!os) throw DataError("cannot write prosody pairs: " + out_prefix + "_pairs.csv");
    os << "attacker_id,target_id,condition,utt_a,utt_b,d_hz,frames_used,mean_cost,status\n";
    for (const auto &row : rows)
      os << row.attacker_id << ',' << row.target_id << ',' << row.condition << ',' << row.utt_a
         << ',' << row.utt_b << ',' << FormatDouble(row.d_hz) << ',' << row.frames_used << ','
         << FormatDouble(row.mean_cost) << ',' << row.status << "\n";
  }
  Log("prosody: " + std::to_string(rows.size()) + " aligned pairs over " +
      std::to_string(utt_list.size()) + " utterances");
  return 0;
}

int CmdTrials(const GlobalOptions &g, const std::string &manifest_path,
              const std::string &assign_path, int per_combination,
              const std::string &out_path) {
  const Manifest manifest = LoadManifest(manifest_path);
  const auto assignments = ReadAssignmentsCsv(assign_path);
  const auto trials = GenerateListeningTrials(manifest, assignments, per_combination, g.seed);
  std::ofstream os(out_path);
  if (!os) throw DataError("cannot write listening trials: " + out_path);
  os << "trial_id,group,sample_a,sample_b,presentation_order_seed\n";
  for (const auto &t : trials)
    os << t.trial_id << ',' << ToString(t.group) << ',' << t.sample_a << ',' << t.sample_b
       << ',' << t.presentation_order_seed << "\n";
  Log("trials: " + std::to_string(trials.size()) + " listening trials");
  return 0;
}

int CmdEer(const std::string &scores_path) {
  std::ifstream in(scores_path);
  if (!in) throw DataError("cannot open scores: " + scores_path);
  const auto scored = ReadScoredTrialsCsv(in, scores_path);
  std::vector<double> target, nontarget;
  for (const auto &t : scored) {
    if (t.hypothesis == Hypothesis::kTarget)
      target.push_back(t.llr);
    else if (t.hypothesis == Hypothesis::kNontarget)
      nontarget.push_back(t.llr);
  }
  const EerResult r = ComputeEer(std::move(target), std::move(nontarget));
  std::cout << "eer " << r.eer << " threshold " << r.threshold << "\n";
  return 0;
}

int CmdReport(const GlobalOptions &g, const std::vector<std::string> &score_files,
              const std::vector<std::string> &score_labels, const std::string &prosody_prefix,
              const std::string &fixture_path, const std::string &out_dir) {
  (void)g;
  fs::create_directories(out_dir);
  nlohmann::json bundle;
  bundle["schema"] = "asvmimic.report.v1";

  if (score_files.empty()) Warn("report: no score files given; bundle will be sparse");
  std::vector<DeltaTableRow> delta_rows;
  for (std::size_t i = 0; i < score_files.size(); ++i) {
    const std::string label =
        i < score_labels.size() ? score_labels[i] : ("system" + std::to_string(i));
    std::ifstream in(score_files[i]);
    if (!in) throw DataError("cannot open scores: " + score_files[i]);
    const auto scored = ReadScoredTrialsCsv(in, score_files[i]);

    const auto summaries = SummarizeCategories(scored);
    bundle["systems"][label]["category_summary"] = ToJson(summaries);
    {
      std::ofstream os(fs::path(out_dir) / (label + "_categories.csv"));
      os << "rank_category,language_pool,condition,mean_llr,ci_halfwidth,n_trials\n";
      for (const auto &s : summaries)
        os << ToString(s.rank_category) << ',' << ToString(s.language_pool) << ','
           << ToString(s.condition) << ',' << FormatDouble(s.mean_llr) << ','
           << FormatDouble(s.ci_halfwidth) << ',' << s.n_trials << "\n";
    }
    // gnuplot-ready mean/ci rows per category and condition
    {
      std::ofstream os(fs::path(out_dir) / (label + "_fig2.dat"));
      os << "# category pool condition mean ci\n";
      for (const auto &s : summaries)
        os << ToString(s.rank_category) << ' ' << ToString(s.language_pool) << ' '
           << ToString(s.condition) << ' ' << FormatDouble(s.mean_llr) << ' '
           << FormatDouble(s.ci_halfwidth) << "\n";
    }

    const auto deltas = ComputeMimicryDeltas(scored);
    bundle["systems"][label]["mimicry_deltas"] = ToJson(deltas);
    DeltaTableRow row;
    row.system_label = label;
    row.cells.assign(4, {0.0, 0.0});
    for (const auto &d : deltas.deltas)
      row.cells[static_cast<std::size_t>(d.rank_category)] = {d.delta_mean, d.ci_halfwidth};
    delta_rows.push_back(std::move(row));

    const auto dists = ComputeDomainDistributions(scored);
    bundle["systems"][label]["domain_distributions"] = ToJson(dists);
    {
      std::ofstream os(fs::path(out_dir) / (label + "_fig3.dat"));
      os << "# bin_center domain hypothesis count\n";
      for (const auto &d : dists)
        for (std::size_t b = 0; b + 1 < d.bin_edges.size(); ++b)
          os << FormatDouble((d.bin_edges[b] + d.bin_edges[b + 1]) / 2.0) << ' '
             << ToString(d.domain) << ' ' << ToString(d.hypothesis) << ' ' << d.counts[b]
             << "\n";
    }
  }

  if (!fixture_path.empty()) {
    std::ifstream in(fixture_path);
    if (!in) throw DataError("cannot open delta fixture: " + fixture_path);
    delta_rows = ParseDeltaFixtureCsv(in, fixture_path);
  }
  if (!delta_rows.empty()) {
    const std::string table = RenderDeltaTable(delta_rows);
    std::ofstream os(fs::path(out_dir) / "delta_table.txt");
    os << table;
    bundle["delta_table"] = table;
  }

  if (!prosody_prefix.empty()) {
    // rebuild the Fig-5-style improvement flags from the prosody CSVs
    std::ifstream utts_in(prosody_prefix + "_utts.csv");
    std::ifstream pairs_in(prosody_prefix + "_pairs.csv");
    if (!utts_in || !pairs_in)
      throw DataError("report: prosody tables not found under prefix " + prosody_prefix);
    struct Stats {
      double f0_median = 0.0, f0_std = 0.0, rate = 0.0;
    };
    std::map<std::string, Stats> per_utt;
    std::map<std::string, std::string> utt_session;
    std::string line;
    std::getline(utts_in, line);
    int line_no = 1;
    while (std::getline(utts_in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = manifest_detail::SplitCsvLine(line);
      if (f.size() != 8) throw DataError("prosody utts CSV: bad row");
      per_utt[f[0]] = {manifest_detail::ParseDouble(f[3], line_no, "f0_median"),
                       manifest_detail::ParseDouble(f[4], line_no, "f0_std"),
                       manifest_detail::ParseDouble(f[5], line_no, "rate")};
      utt_session[f[0]] = f[2];
    }
    struct PairAcc {
      std::vector<double> d_nat, d_mim;
      std::vector<std::string> utts_nat, utts_mim, utts_tgt;
    };
    std::map<std::pair<std::string, std::string>, PairAcc> acc;
    std::getline(pairs_in, line);
    line_no = 1;
    while (std::getline(pairs_in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = manifest_detail::SplitCsvLine(line);
      if (f.size() != 9) throw DataError("prosody pairs CSV: bad row");
      if (f[8] != "ok") continue;
      auto &cell = acc[{f[0], f[1]}];
      const double d = manifest_detail::ParseDouble(f[5], line_no, "d_hz");
      if (f[2] == "zero_effort") {
        cell.d_nat.push_back(d);
        cell.utts_nat.push_back(f[3]);
      } else {
        cell.d_mim.push_back(d);
        cell.utts_mim.push_back(f[3]);
      }
      cell.utts_tgt.push_back(f[4]);
    }
    std::vector<ProsodyPair> prosody_pairs;
    for (const auto &[key, cell] : acc) {
      if (cell.d_nat.empty() || cell.d_mim.empty()) continue;
      ProsodyPair p;
      p.attacker_id = key.first;
      p.target_id = key.second;
      auto mean_of = [&](const std::vector<std::string> &ids, auto field) {
        double s = 0.0;
        int n = 0;
        for (const auto &id : ids) {
          auto it = per_utt.find(id);
          if (it == per_utt.end()) continue;
          s += field(it->second);
          ++n;
        }
        return n > 0 ? s / n : 0.0;
      };
      auto fill = [&](ProsodyCell &cellv, const std::vector<std::string> &ids) {
        cellv.f0_median = mean_of(ids, [](const Stats &s) { return s.f0_median; });
        cellv.f0_std = mean_of(ids, [](const Stats &s) { return s.f0_std; });
        cellv.speaking_rate = mean_of(ids, [](const Stats &s) { return s.rate; });
      };
      fill(p.natural, cell.utts_nat);
      fill(p.mimicry, cell.utts_mim);
      fill(p.target, cell.utts_tgt);
      double s = 0.0;
      for (double d : cell.d_nat) s += d;
      p.formant_d_natural = s / static_cast<double>(cell.d_nat.size());
      s = 0.0;
      for (double d : cell.d_mim) s += d;
      p.formant_d_mimicry = s / static_cast<double>(cell.d_mim.size());
      prosody_pairs.push_back(std::move(p));
    }
    const auto change_rows = ComputeProsodyReport(prosody_pairs);
    bundle["prosody_changes"] = ToJson(change_rows);
    std::ofstream os(fs::path(out_dir) / "prosody_changes.csv");
    os << "attacker_id,target_id,parameter,natural_distance,mimicry_distance,improved\n";
    for (const auto &r : change_rows)
      os << r.attacker_id << ',' << r.target_id << ',' << r.parameter << ','
         << FormatDouble(r.natural_distance) << ',' << FormatDouble(r.mimicry_distance) << ','
         << (r.improved ? 1 : 0) << "\n";
    std::ofstream fig5(fs::path(out_dir) / "fig5.dat");
    fig5 << "# attacker target parameter natural mimicry improved\n";
    for (const auto &r : change_rows)
      fig5 << r.attacker_id << ' ' << r.target_id << ' ' << r.parameter << ' '
           << FormatDouble(r.natural_distance) << ' ' << FormatDouble(r.mimicry_distance) << ' '
           << (r.improved ? 1 : 0) << "\n";
  }

  std::ofstream os(fs::path(out_dir) / "report.json");
  if (!os) throw DataError("cannot write report bundle");
  os << bundle.dump(2) << "\n";
  Log("report: bundle written to " + out_dir);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"ASV-assisted voice-mimicry attack simulation toolkit"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "config file (sectioned key=value)");
  app.add_option("--store", g.store_root, "artifact store root (env ASVMIMIC_STORE)");
  app.add_option("--jobs", g.jobs, "worker threads (never changes outputs)");
  app.add_option("--seed", g.seed, "seed for randomized stages");
  app.add_flag("--deterministic", g.deterministic, "pin all seeds for byte-identical reruns");

  // synth-corpus
  auto *synth = app.add_subcommand("synth-corpus", "generate the seeded synthetic corpus");
  std::string out_dir = "corpus";
  int speakers = 50, attackers = 5, utts = 10, prompts = 6;
  double native_fraction = 0.5;
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--speakers", speakers, "total speakers (attackers + targets)");
  synth->add_option("--attackers", attackers, "designated attackers");
  synth->add_option("--utts", utts, "wild utterances per target");
  synth->add_option("--prompts", prompts, "shared prompts (zero-effort/mimicry takes)");
  synth->add_option("--native-fraction", native_fraction, "fraction of FI-tagged targets");

  // train
  auto *train = app.add_subcommand("train", "train all models of one profile");
  std::string manifest_path, profile_id = "a";
  train->add_option("--manifest", manifest_path, "manifest CSV/JSONL")->required();
  train->add_option("--profile", profile_id, "profile id (a|b)")->required();

  // extract
  auto *extract = app.add_subcommand("extract", "extract embeddings for every utterance");
  std::string extract_manifest, extract_profile = "a", extract_csv;
  extract->add_option("--manifest", extract_manifest, "manifest")->required();
  extract->add_option("--profile", extract_profile, "profile id")->required();
  extract->add_option("--csv", extract_csv, "optional embedding CSV export");

  // rank
  auto *rank = app.add_subcommand("rank", "rank targets for one attacker");
  std::string rank_manifest, rank_profile = "a", rank_attacker, rank_filter = "all";
  std::string rank_pool = "nonnative", rank_out, rank_assign_out, rank_common;
  rank->add_option("--manifest", rank_manifest, "manifest")->required();
  rank->add_option("--profile", rank_profile, "profile id")->required();
  rank->add_option("--attacker", rank_attacker, "attacker speaker id")->required();
  rank->add_option("--filter", rank_filter, "target filter: all | nat=XX | nat!=XX");
  rank->add_option("--pool", rank_pool, "language pool tag (native|nonnative)");
  rank->add_option("--ranking-out", rank_out, "ranking CSV")->required();
  rank->add_option("--assignments-out", rank_assign_out, "assignments CSV")->required();
  rank->add_option("--common-target", rank_common, "gender-matched common target id");

  // select-utterances
  auto *sel = app.add_subcommand("select-utterances", "pick target test material");
  std::string sel_manifest, sel_profile = "a", sel_assign, sel_out;
  double sel_min_active = 30.0;
  sel->add_option("--manifest", sel_manifest, "manifest")->required();
  sel->add_option("--profile", sel_profile, "profile id")->required();
  sel->add_option("--assignments", sel_assign, "assignments CSV")->required();
  sel->add_option("--out", sel_out, "selections CSV")->required();
  sel->add_option("--min-active-speech", sel_min_active, "active-speech floor in seconds");

  // attack
  auto *attack = app.add_subcommand("attack", "build and score attack trials");
  std::string atk_manifest, atk_profile = "b", atk_assign, atk_select, atk_scores, atk_summary;
  attack->add_option("--manifest", atk_manifest, "manifest")->required();
  attack->add_option("--profile", atk_profile, "profile id")->required();
  attack->add_option("--assignments", atk_assign, "assignments CSV")->required();
  attack->add_option("--selections", atk_select, "selections CSV")->required();
  attack->add_option("--scores-out", atk_scores, "scored trials CSV")->required();
  attack->add_option("--summary-out", atk_summary, "category summary JSON");

  // transfer-report
  auto *transfer = app.add_subcommand("transfer-report", "cross-system rank transfer");
  std::vector<std::string> tr_rank_a, tr_rank_b;
  std::string tr_scores, tr_out;
  transfer->add_option("--ranking-a", tr_rank_a, "attacker-side ranking CSVs")->required();
  transfer->add_option("--ranking-b", tr_rank_b, "attacked-side ranking CSVs")->required();
  transfer->add_option("--scores", tr_scores, "attacked-profile scored trials CSV")->required();
  transfer->add_option("--out", tr_out, "transfer report JSON")->required();

  // prosody
  auto *prosody = app.add_subcommand("prosody", "F0/rate/formant analysis of attack pairs");
  std::string pr_manifest, pr_assign, pr_out = "prosody";
  prosody->add_option("--manifest", pr_manifest, "manifest")->required();
  prosody->add_option("--assignments", pr_assign, "assignments CSV")->required();
  prosody->add_option("--out-prefix", pr_out, "output prefix (<prefix>_utts.csv, _pairs.csv)");

  // trials
  auto *trials = app.add_subcommand("trials", "generate listening-test trial lists");
  std::string lt_manifest, lt_assign, lt_out;
  int lt_per_comb = 5;
  trials->add_option("--manifest", lt_manifest, "manifest")->required();
  trials->add_option("--assignments", lt_assign, "assignments CSV")->required();
  trials->add_option("--per-combination", lt_per_comb, "trials per attacker-target pair (4..7)");
  trials->add_option("--out", lt_out, "trial list CSV")->required();

  // report
  auto *report = app.add_subcommand("report", "consolidated report bundle");
  std::vector<std::string> rp_scores, rp_labels;
  std::string rp_prosody, rp_fixture, rp_out = "report";
  report->add_option("--scores", rp_scores, "scored trial CSVs");
  report->add_option("--labels", rp_labels, "system labels for the score files");
  report->add_option("--prosody-prefix", rp_prosody, "prefix used by `prosody`");
  report->add_option("--deltas-fixture", rp_fixture, "pre-aggregated delta CSV for the table");
  report->add_option("--out", rp_out, "output directory")->required();

  // eer
  auto *eer = app.add_subcommand("eer", "equal error rate of a scored trial CSV");
  std::string eer_scores;
  eer->add_option("--scores", eer_scores, "scored trials CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return CmdSynthCorpus(g, out_dir, speakers, attackers, utts, prompts, native_fraction);
    if (train->parsed()) return CmdTrain(g, manifest_path, profile_id);
    if (extract->parsed()) return CmdExtract(g, extract_manifest, extract_profile, extract_csv);
    if (rank->parsed())
      return CmdRank(g, rank_manifest, rank_profile, rank_attacker, rank_filter, rank_pool,
                     rank_out, rank_assign_out, rank_common);
    if (sel->parsed())
      return CmdSelectUtterances(g, sel_manifest, sel_profile, sel_assign, sel_out,
                                 sel_min_active);
    if (attack->parsed())
      return CmdAttack(g, atk_manifest, atk_profile, atk_assign, atk_select, atk_scores,
                       atk_summary);
    if (transfer->parsed()) return CmdTransferReport(tr_rank_a, tr_rank_b, tr_scores, tr_out);
    if (prosody->parsed()) return CmdProsody(g, pr_manifest, pr_assign, pr_out);
    if (trials->parsed()) return CmdTrials(g, lt_manifest, lt_assign, lt_per_comb, lt_out);
    if (report->parsed())
      return CmdReport(g, rp_scores, rp_labels, rp_prosody, rp_fixture, rp_out);
    if (eer->parsed()) return CmdEer(eer_scores);
  } catch (const DataError &e) {
    std::cerr << "asvmimic: data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError &e) {
    std::cerr << "asvmimic: numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "asvmimic: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
