// asvmimic/dsp.hpp

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

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace asvmimic {

constexpr double kPi = 3.14159265358979323846;

inline std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 FFT.  data.size() must be a power of two.
// inverse=true computes the unscaled inverse transform (divide by N yourself).
inline void Fft(std::vector<std::complex<double>> &data, bool inverse = false) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  // bit reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = data[i + k];
        std::complex<double> v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Power spectrum of a real frame, zero-padded to nfft (power of two).
// Returns nfft/2+1 bins.
inline std::vector<double> PowerSpectrum(const std::vector<double> &frame,
                                         std::size_t nfft) {
  std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
  for (std::size_t i = 0; i < frame.size() && i < nfft; ++i) buf[i] = frame[i];
  Fft(buf);
  std::vector<double> power(nfft / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
  return power;
}

inline std::vector<double> HammingWindow(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

inline std::vector<double> HannWindow(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  return w;
}

// Gaussian-like analysis window; sigma = (n-1)/6 puts the 3-sigma point at
// the frame edge.
inline std::vector<double> GaussianWindow(std::size_t n) {
  std::vector<double> w(n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double sigma = (static_cast<double>(n) - 1.0) / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (static_cast<double>(i) - c) / sigma;
    w[i] = std::exp(-0.5 * z * z);
  }
  return w;
}

// Modified Bessel function of the first kind, order zero (series expansion).
inline double BesselI0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

// Kaiser window value for u in [-1, 1].
inline double KaiserValue(double u, double beta) {
  if (u < -1.0 || u > 1.0) return 0.0;
  return BesselI0(beta * std::sqrt(1.0 - u * u)) / BesselI0(beta);
}

inline double Sinc(double x) {
  if (std::fabs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace asvmimic
