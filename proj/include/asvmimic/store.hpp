// asvmimic/store.hpp

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

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "asvmimic/common.hpp"
#include "asvmimic/serial.hpp"

namespace asvmimic {

// Specialized per storable artifact type; gives the blob header tag and
// format version plus the (de)serializers.
template <typename T>
struct ArtifactTraits;

inline constexpr char kStoreMagic[4] = {'A', 'S', 'V', 'M'};
inline constexpr const char *kStoreEnvVar = "ASVMIMIC_STORE";

inline std::uint64_t Fnv1a64(const std::string &s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/**
   Key-value artifact store over a hashed directory tree.

   Layout: <root>/<first hash byte>/<full hash>.blob; each blob starts with
   a magic, the artifact type tag, and a format version, so a stale or
   mistyped file is rejected instead of misread.  Writes go through a
   temporary file and a rename, so concurrent readers only ever see complete
   blobs.  The root can be overridden by the ASVMIMIC_STORE env var.
*/
class ArtifactStore {
 public:
  explicit ArtifactStore(std::string root) : root_(std::move(root)) {
    if (root_.empty()) throw DataError("store root must not be empty");
    std::filesystem::create_directories(root_);
  }

  // Root from the environment, or the given fallback.
  static std::string ResolveRoot(const std::string &fallback) {
    const char *env = std::getenv(kStoreEnvVar);
    if (env != nullptr && env[0] != '\0') return env;
    return fallback;
  }

  const std::string &root() const { return root_; }

  bool Has(const std::string &key) const {
    return std::filesystem::exists(PathFor(key));
  }

  void PutBytes(const std::string &key, std::uint32_t type_tag, std::uint32_t version,
                const std::vector<char> &payload) const {
    const std::filesystem::path path = PathFor(key);
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) throw DataError("cannot write store blob: " + tmp.string());
      os.write(kStoreMagic, 4);
      WriteU32(os, type_tag);
      WriteU32(os, version);
      WriteU64(os, key.size());
      os.write(key.data(), static_cast<std::streamsize>(key.size()));
      os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
      if (!os) throw DataError("short write on store blob: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  std::vector<char> GetBytes(const std::string &key, std::uint32_t expect_tag,
                             std::uint32_t expect_version) const {
    const std::filesystem::path path = PathFor(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing store key: '" + key + "'");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    if (raw.size() < 20 || std::memcmp(raw.data(), kStoreMagic, 4) != 0)
      throw DataError("corrupt store blob for key '" + key + "'");
    std::size_t pos = 4;
    const std::uint32_t tag = ReadU32(raw, pos);
    const std::uint32_t version = ReadU32(raw, pos);
    const std::uint64_t key_len = ReadU64(raw, pos);
    if (pos + key_len > raw.size())
      throw DataError("corrupt store blob for key '" + key + "'");
    pos += key_len;
    if (tag != expect_tag)
      throw DataError("store key '" + key + "' holds a different artifact type");
    if (version != expect_version)
      throw DataError("store key '" + key + "': serialized version mismatch");
    return std::vector<char>(raw.begin() + static_cast<std::ptrdiff_t>(pos), raw.end());
  }

  template <typename T>
  void Put(const std::string &key, const T &artifact) const {
    BlobWriter w;
    ArtifactTraits<T>::Serialize(w, artifact);
    PutBytes(key, ArtifactTraits<T>::kTypeTag, ArtifactTraits<T>::kVersion, w.bytes());
  }

  template <typename T>
  T Get(const std::string &key) const {
    BlobReader r(GetBytes(key, ArtifactTraits<T>::kTypeTag, ArtifactTraits<T>::kVersion));
    return ArtifactTraits<T>::Deserialize(r);
  }

 private:
  std::filesystem::path PathFor(const std::string &key) const {
    char hex[17];
    const std::uint64_t h = Fnv1a64(key);
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    const std::string full(hex);
    return std::filesystem::path(root_) / full.substr(0, 2) / (full + ".blob");
  }

  static void WriteU32(std::ostream &os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
  }
  static void WriteU64(std::ostream &os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
  }
  static std::uint32_t ReadU32(const std::vector<char> &raw, std::size_t &pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  static std::uint64_t ReadU64(const std::vector<char> &raw, std::size_t &pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }

  std::string root_;
};

}  // namespace asvmimic
