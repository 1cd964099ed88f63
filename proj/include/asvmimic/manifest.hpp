// asvmimic/manifest.hpp

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

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asvmimic/common.hpp"

namespace asvmimic {

enum class Role { kAttacker, kTarget };
enum class Gender { kMale, kFemale, kUnknown };
// natural: attacker's own voice (target-search material)
// zero_effort: attacker reads target's text in natural voice
// mimicry: attacker imitates the target
// wild: in-the-wild target audio
enum class Session { kNatural, kZeroEffort, kMimicry, kWild };

inline std::string ToString(Role r) { return r == Role::kAttacker ? "attacker" : "target"; }
inline std::string ToString(Gender g) {
  switch (g) {
    case Gender::kMale: return "male";
    case Gender::kFemale: return "female";
    default: return "unknown";
  }
}
inline std::string ToString(Session s) {
  switch (s) {
    case Session::kNatural: return "natural";
    case Session::kZeroEffort: return "zero_effort";
    case Session::kMimicry: return "mimicry";
    default: return "wild";
  }
}

inline Role ParseRole(const std::string &s) {
  if (s == "attacker") return Role::kAttacker;
  if (s == "target") return Role::kTarget;
  throw DataError("invalid role: '" + s + "'");
}
inline Gender ParseGender(const std::string &s) {
  if (s == "male") return Gender::kMale;
  if (s == "female") return Gender::kFemale;
  if (s == "unknown") return Gender::kUnknown;
  throw DataError("invalid gender: '" + s + "'");
}
inline Session ParseSession(const std::string &s) {
  if (s == "natural") return Session::kNatural;
  if (s == "zero_effort") return Session::kZeroEffort;
  if (s == "mimicry") return Session::kMimicry;
  if (s == "wild") return Session::kWild;
  throw DataError("invalid session: '" + s + "'");
}

struct SpeakerRecord {
  std::string speaker_id;
  Role role = Role::kTarget;
  Gender gender = Gender::kUnknown;
  std::string nationality;  // e.g. "FI"
  std::optional<std::string> display_name;
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string audio_path;
  Session session = Session::kWild;
  double duration_s = 0.0;
  int sample_rate_hz = 0;
  std::optional<std::string> prompt_id;  // shared spoken content tag
  std::optional<std::string> partition;  // training split tag (per profile)
  bool quality_ok = true;                // manual-audit replacement flag
};

struct Manifest {
  std::vector<SpeakerRecord> speakers;
  std::vector<UtteranceRecord> utterances;

  const SpeakerRecord *FindSpeaker(const std::string &id) const {
    for (const auto &s : speakers)
      if (s.speaker_id == id) return &s;
    return nullptr;
  }
  const UtteranceRecord *FindUtterance(const std::string &id) const {
    for (const auto &u : utterances)
      if (u.utterance_id == id) return &u;
    return nullptr;
  }
  std::vector<const UtteranceRecord *> UtterancesOf(const std::string &speaker_id) const {
    std::vector<const UtteranceRecord *> out;
    for (const auto &u : utterances)
      if (u.speaker_id == speaker_id) out.push_back(&u);
    return out;
  }
  std::vector<const UtteranceRecord *> UtterancesOf(const std::string &speaker_id,
                                                    Session session) const {
    std::vector<const UtteranceRecord *> out;
    for (const auto &u : utterances)
      if (u.speaker_id == speaker_id && u.session == session) out.push_back(&u);
    return out;
  }
};

inline constexpr const char *kManifestSchemaV1 = "asvmimic.manifest.v1";
inline constexpr const char *kManifestHeader =
    "speaker_id,role,gender,nationality,utterance_id,audio_path,session,"
    "sample_rate_hz,duration_s,display_name,prompt_id,quality,partition";

// Checks every manifest invariant; throws DataError naming the offender.
inline void ValidateManifest(const Manifest &m) {
  std::set<std::string> speaker_ids;
  for (const auto &s : m.speakers) {
    if (s.speaker_id.empty()) throw DataError("empty speaker_id");
    if (!speaker_ids.insert(s.speaker_id).second)
      throw DataError("duplicate speaker_id: '" + s.speaker_id + "'");
  }
  std::set<std::string> utterance_ids;
  for (const auto &u : m.utterances) {
    if (u.utterance_id.empty()) throw DataError("empty utterance_id");
    if (!utterance_ids.insert(u.utterance_id).second)
      throw DataError("duplicate utterance_id: '" + u.utterance_id + "'");
    if (!speaker_ids.count(u.speaker_id))
      throw DataError("utterance '" + u.utterance_id +
                      "' references unknown speaker '" + u.speaker_id + "'");
    if (!(u.duration_s > 0.0))
      throw DataError("utterance '" + u.utterance_id + "' has non-positive duration");
    const SpeakerRecord *spk = m.FindSpeaker(u.speaker_id);
    if (spk->role == Role::kTarget && u.session != Session::kWild)
      throw DataError("utterance '" + u.utterance_id +
                      "': target speakers carry only session=wild");
    if (spk->role == Role::kAttacker && u.session == Session::kWild)
      throw DataError("utterance '" + u.utterance_id +
                      "': attackers never carry session=wild");
  }
}

namespace manifest_detail {

inline std::vector<std::string> SplitCsvLine(const std::string &line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double ParseDouble(const std::string &s, int line_no, const char *what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    std::ostringstream os;
    os << "line " << line_no << ": cannot parse " << what << " from '" << s << "'";
    throw DataError(os.str());
  }
}

inline int ParseInt(const std::string &s, int line_no, const char *what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    std::ostringstream os;
    os << "line " << line_no << ": cannot parse " << what << " from '" << s << "'";
    throw DataError(os.str());
  }
}

}  // namespace manifest_detail

// Loads the CSV manifest format.  The first non-empty line must be the
// schema marker "#schema=asvmimic.manifest.v1", followed by the fixed
// header; each data row carries one utterance with its speaker attributes
// denormalized.  Trailing optional columns may be omitted.  An empty file
// yields an empty manifest.
inline Manifest LoadManifestCsv(std::istream &in, const std::string &origin) {
  Manifest m;
  std::string line;
  int line_no = 0;
  bool saw_schema = false, saw_header = false;
  std::map<std::string, std::size_t> speaker_index;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_schema) {
      if (line.rfind("#schema=", 0) != 0)
        throw DataError(origin + ": line 1: missing '#schema=' marker");
      const std::string version = line.substr(8);
      if (version != kManifestSchemaV1)
        throw DataError(origin + ": unsupported manifest schema '" + version + "'");
      saw_schema = true;
      continue;
    }
    if (line[0] == '#') continue;
    if (!saw_header) {
      if (line.rfind("speaker_id,", 0) != 0) {
        std::ostringstream os;
        os << origin << ": line " << line_no << ": expected manifest header";
        throw DataError(os.str());
      }
      saw_header = true;
      continue;
    }
    auto f = manifest_detail::SplitCsvLine(line);
    if (f.size() < 9) {
      std::ostringstream os;
      os << origin << ": line " << line_no << ": expected at least 9 columns, got "
         << f.size();
      throw DataError(os.str());
    }
    SpeakerRecord spk;
    spk.speaker_id = f[0];
    try {
      spk.role = ParseRole(f[1]);
      spk.gender = ParseGender(f[2]);
    } catch (const DataError &e) {
      std::ostringstream os;
      os << origin << ": line " << line_no << ": " << e.what();
      throw DataError(os.str());
    }
    spk.nationality = f[3];
    if (f.size() > 9 && !f[9].empty()) spk.display_name = f[9];

    UtteranceRecord utt;
    utt.utterance_id = f[4];
    utt.speaker_id = f[0];
    utt.audio_path = f[5];
    try {
      utt.session = ParseSession(f[6]);
    } catch (const DataError &e) {
      std::ostringstream os;
      os << origin << ": line " << line_no << ": " << e.what();
      throw DataError(os.str());
    }
    utt.sample_rate_hz = manifest_detail::ParseInt(f[7], line_no, "sample_rate_hz");
    utt.duration_s = manifest_detail::ParseDouble(f[8], line_no, "duration_s");
    if (f.size() > 10 && !f[10].empty()) utt.prompt_id = f[10];
    if (f.size() > 11 && !f[11].empty()) utt.quality_ok = (f[11] != "bad");
    if (f.size() > 12 && !f[12].empty()) utt.partition = f[12];

    auto it = speaker_index.find(spk.speaker_id);
    if (it == speaker_index.end()) {
      speaker_index[spk.speaker_id] = m.speakers.size();
      m.speakers.push_back(spk);
    } else {
      const SpeakerRecord &prev = m.speakers[it->second];
      if (prev.role != spk.role || prev.gender != spk.gender ||
          prev.nationality != spk.nationality) {
        std::ostringstream os;
        os << origin << ": line " << line_no << ": conflicting attributes for speaker '"
           << spk.speaker_id << "'";
        throw DataError(os.str());
      }
    }
    m.utterances.push_back(utt);
  }
  ValidateManifest(m);
  return m;
}

// JSON-lines variant: first record {"schema": ...}; then records with
// "kind": "speaker" or "utterance".
inline Manifest LoadManifestJsonl(std::istream &in, const std::string &origin) {
  Manifest m;
  std::string line;
  int line_no = 0;
  bool saw_schema = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      std::ostringstream os;
      os << origin << ": line " << line_no << ": " << e.what();
      throw DataError(os.str());
    }
    if (!saw_schema) {
      if (!j.contains("schema") || j["schema"] != kManifestSchemaV1)
        throw DataError(origin + ": first JSONL record must carry the schema field");
      saw_schema = true;
      continue;
    }
    const std::string kind = j.value("kind", "");
    try {
      if (kind == "speaker") {
        SpeakerRecord s;
        s.speaker_id = j.at("speaker_id").get<std::string>();
        s.role = ParseRole(j.at("role").get<std::string>());
        s.gender = ParseGender(j.at("gender").get<std::string>());
        s.nationality = j.value("nationality", "");
        if (j.contains("display_name")) s.display_name = j["display_name"].get<std::string>();
        m.speakers.push_back(s);
      } else if (kind == "utterance") {
        UtteranceRecord u;
        u.utterance_id = j.at("utterance_id").get<std::string>();
        u.speaker_id = j.at("speaker_id").get<std::string>();
        u.audio_path = j.value("audio_path", "");
        u.session = ParseSession(j.at("session").get<std::string>());
        u.duration_s = j.at("duration_s").get<double>();
        u.sample_rate_hz = j.value("sample_rate_hz", 0);
        if (j.contains("prompt_id")) u.prompt_id = j["prompt_id"].get<std::string>();
        if (j.contains("partition")) u.partition = j["partition"].get<std::string>();
        if (j.contains("quality")) u.quality_ok = (j["quality"].get<std::string>() != "bad");
        m.utterances.push_back(u);
      } else {
        std::ostringstream os;
        os << origin << ": line " << line_no << ": unknown record kind '" << kind << "'";
        throw DataError(os.str());
      }
    } catch (const nlohmann::json::exception &e) {
      std::ostringstream os;
      os << origin << ": line " << line_no << ": " << e.what();
      throw DataError(os.str());
    }
  }
  ValidateManifest(m);
  return m;
}

inline Manifest LoadManifest(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl")
    return LoadManifestJsonl(in, path);
  return LoadManifestCsv(in, path);
}

inline void SaveManifestCsv(const Manifest &m, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest: " + path);
  os << "#schema=" << kManifestSchemaV1 << "\n" << kManifestHeader << "\n";
  for (const auto &u : m.utterances) {
    const SpeakerRecord *s = m.FindSpeaker(u.speaker_id);
    if (s == nullptr) throw DataError("unknown speaker in manifest: " + u.speaker_id);
    os << s->speaker_id << ',' << ToString(s->role) << ',' << ToString(s->gender) << ','
       << s->nationality << ',' << u.utterance_id << ',' << u.audio_path << ','
       << ToString(u.session) << ',' << u.sample_rate_hz << ',' << u.duration_s << ','
       << (s->display_name ? *s->display_name : "") << ','
       << (u.prompt_id ? *u.prompt_id : "") << ',' << (u.quality_ok ? "ok" : "bad") << ','
       << (u.partition ? *u.partition : "") << "\n";
  }
  if (!os) throw DataError("short write on manifest: " + path);
}

}  // namespace asvmimic
