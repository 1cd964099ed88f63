// asvmimic/common.hpp

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

#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace asvmimic {

// Bad or inconsistent input data (missing files, malformed manifests,
// contract violations).  The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

// Numerical failure during training or scoring (non-finite likelihood,
// singular systems).  The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

// All diagnostics go to stderr; machine output only to files/stdout.
inline void Warn(const std::string &msg) {
  std::cerr << "asvmimic: warning: " << msg << "\n";
}

inline void Log(const std::string &msg) {
  std::cerr << "asvmimic: " << msg << "\n";
}

}  // namespace asvmimic
