// asvmimic/serial.hpp

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
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asvmimic/common.hpp"

namespace asvmimic {

// Little-endian binary writer over an in-memory buffer.  Doubles are written
// raw, so model round-trips are bit-exact.
class BlobWriter {
 public:
  void WriteU8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void WriteU32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void WriteU64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void WriteI64(std::int64_t v) { WriteU64(static_cast<std::uint64_t>(v)); }
  void WriteDouble(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    WriteU64(bits);
  }
  void WriteString(const std::string &s) {
    WriteU64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void WriteMatrix(const Eigen::MatrixXd &m) {
    WriteI64(m.rows());
    WriteI64(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) WriteDouble(m(r, c));
  }
  void WriteVector(const Eigen::VectorXd &v) {
    WriteI64(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) WriteDouble(v(i));
  }
  const std::vector<char> &bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class BlobReader {
 public:
  explicit BlobReader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

  std::uint8_t ReadU8() { return static_cast<std::uint8_t>(Next(1)[0]); }
  std::uint32_t ReadU32() {
    const char *p = Next(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::uint64_t ReadU64() {
    const char *p = Next(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::int64_t ReadI64() { return static_cast<std::int64_t>(ReadU64()); }
  double ReadDouble() {
    std::uint64_t bits = ReadU64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string ReadString() {
    std::uint64_t n = ReadU64();
    const char *p = Next(n);
    return std::string(p, p + n);
  }
  Eigen::MatrixXd ReadMatrix() {
    const std::int64_t rows = ReadI64(), cols = ReadI64();
    if (rows < 0 || cols < 0) throw DataError("corrupt blob: negative matrix shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = ReadDouble();
    return m;
  }
  Eigen::VectorXd ReadVector() {
    const std::int64_t n = ReadI64();
    if (n < 0) throw DataError("corrupt blob: negative vector length");
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = ReadDouble();
    return v;
  }
  bool AtEnd() const { return pos_ == buf_.size(); }

 private:
  const char *Next(std::uint64_t n) {
    if (pos_ + n > buf_.size()) throw DataError("corrupt blob: unexpected end");
    const char *p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace asvmimic
