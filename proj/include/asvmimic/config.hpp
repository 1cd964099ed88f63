// asvmimic/config.hpp

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
#include <sstream>
#include <string>

#include "asvmimic/common.hpp"
#include "asvmimic/profile.hpp"

namespace asvmimic {

/**
   Minimal sectioned key/value config:

     [profile.a]
     ubm_components = 32
     ivector_dim = 40

   Lines starting with '#' or ';' are comments.  Values stay strings until a
   typed getter asks for them; precedence is CLI flags > file > defaults
   (the CLI applies its flags after loading the file).
*/
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig LoadFile(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      if (line[first] == '#' || line[first] == ';') continue;
      if (line[first] == '[') {
        const auto close = line.find(']', first);
        if (close == std::string::npos)
          throw DataError(path + ": line " + std::to_string(line_no) + ": unterminated section");
        section = line.substr(first + 1, close - first - 1);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw DataError(path + ": line " + std::to_string(line_no) + ": expected key = value");
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw DataError(path + ": line " + std::to_string(line_no) + ": empty key");
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  void Set(const std::string &dotted_key, const std::string &value) {
    values_[dotted_key] = value;
  }
  bool Has(const std::string &dotted_key) const { return values_.count(dotted_key) > 0; }

  std::string GetString(const std::string &key, const std::string &fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  int GetInt(const std::string &key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoi(it->second);
    } catch (const std::exception &) {
      throw DataError("config key '" + key + "': cannot parse integer from '" + it->second + "'");
    }
  }
  double GetDouble(const std::string &key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception &) {
      throw DataError("config key '" + key + "': cannot parse number from '" + it->second + "'");
    }
  }
  bool GetBool(const std::string &key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw DataError("config key '" + key + "': cannot parse boolean from '" + it->second + "'");
  }

  // Applies [profile.<id>] keys over the built-in defaults for that id.
  SystemProfile Profile(const std::string &profile_id) const {
    SystemProfile p;
    if (profile_id == "a")
      p = PublicProfile();
    else if (profile_id == "b")
      p = BlackBoxProfile();
    else
      throw DataError("unknown profile id '" + profile_id + "' (expect 'a' or 'b')");
    const std::string s = "profile." + profile_id + ".";
    p.frontend.n_mfcc = GetInt(s + "n_mfcc", p.frontend.n_mfcc);
    p.frontend.n_mel_filters = GetInt(s + "n_mel_filters", p.frontend.n_mel_filters);
    p.frontend.include_deltas = GetBool(s + "include_deltas", p.frontend.include_deltas);
    p.frontend.rasta = GetBool(s + "rasta", p.frontend.rasta);
    const std::string norm = GetString(s + "norm", p.frontend.norm == NormKind::kCmvn
                                                      ? "cmvn"
                                                      : "sliding_cmn");
    if (norm == "cmvn")
      p.frontend.norm = NormKind::kCmvn;
    else if (norm == "sliding_cmn")
      p.frontend.norm = NormKind::kSlidingCmn;
    else
      throw DataError("config: invalid norm '" + norm + "'");
    p.frontend.sliding_window_frames =
        GetInt(s + "sliding_window_frames", p.frontend.sliding_window_frames);
    p.ubm_components = GetInt(s + "ubm_components", p.ubm_components);
    p.ivector_dim = GetInt(s + "ivector_dim", p.ivector_dim);
    p.lda_dim = GetInt(s + "lda_dim", p.lda_dim);
    const std::string variant =
        GetString(s + "plda_variant",
                  p.plda_variant == PldaVariant::kTwoCov ? "two_cov" : "simplified");
    if (variant == "two_cov")
      p.plda_variant = PldaVariant::kTwoCov;
    else if (variant == "simplified")
      p.plda_variant = PldaVariant::kSimplified;
    else
      throw DataError("config: invalid plda_variant '" + variant + "'");
    p.plda_speaker_dim = GetInt(s + "plda_speaker_dim", p.plda_speaker_dim);
    p.train_partition = GetString(s + "train_partition", p.train_partition);
    p.ubm_em_iterations = GetInt(s + "ubm_em_iterations", p.ubm_em_iterations);
    p.tv_em_iterations = GetInt(s + "tv_em_iterations", p.tv_em_iterations);
    p.plda_em_iterations = GetInt(s + "plda_em_iterations", p.plda_em_iterations);
    p.seed = static_cast<unsigned long long>(GetInt(s + "seed", static_cast<int>(p.seed)));
    p.frontend.Check();
    return p;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace asvmimic
