// asvmimic/formant.hpp

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
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "asvmimic/audio.hpp"
#include "asvmimic/common.hpp"
#include "asvmimic/dsp.hpp"
#include "asvmimic/dtw.hpp"
#include "asvmimic/pitch.hpp"

namespace asvmimic {

// First three formant center frequencies per frame; frames without a voiced
// decision or a full set of in-range resonances are flagged unreliable.
struct FormantTrack {
  std::vector<double> frame_times_s;
  Eigen::MatrixXd freqs;  // T x 3 (F1, F2, F3) in Hz
  std::vector<std::uint8_t> reliable;

  std::size_t NumFrames() const { return reliable.size(); }
  double ReliableFraction() const {
    if (reliable.empty()) return 0.0;
    int n = 0;
    for (auto r : reliable) n += (r != 0);
    return static_cast<double>(n) / static_cast<double>(reliable.size());
  }
};

namespace formant_detail {

inline constexpr double kAnalysisRateHz = 10000.0;
inline constexpr int kLpcOrder = 12;
inline constexpr double kFrameS = 0.025;
inline constexpr double kHopS = 0.010;
inline constexpr double kPreemphasis = 0.97;
inline constexpr double kMinFreqHz = 90.0;
inline constexpr double kMaxFreqHz = 4900.0;
inline constexpr double kMaxBandwidthHz = 400.0;

// Burg's method; returns a[1..order] of A(z) = 1 + sum a_k z^-k, or an empty
// vector when the frame has no energy.
inline std::vector<double> BurgLpc(const std::vector<double> &x, int order) {
  const int n = static_cast<int>(x.size());
  if (n <= order + 1) return {};
  std::vector<double> f(x), b(x), a(static_cast<std::size_t>(order) + 1, 0.0);
  a[0] = 1.0;
  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (energy <= 1e-30) return {};

  std::vector<double> a_prev(a);
  for (int m = 1; m <= order; ++m) {
    double num = 0.0, den = 0.0;
    for (int i = m; i < n; ++i) {
      num += f[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i - 1)];
      den += f[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)] +
             b[static_cast<std::size_t>(i - 1)] * b[static_cast<std::size_t>(i - 1)];
    }
    if (den <= 1e-30) return {};
    const double k = -2.0 * num / den;
    a_prev = a;
    for (int j = 1; j <= m; ++j)
      a[static_cast<std::size_t>(j)] = a_prev[static_cast<std::size_t>(j)] +
                                       k * a_prev[static_cast<std::size_t>(m - j)];
    // update forward/backward errors (in place, back to front for b)
    for (int i = n - 1; i >= m; --i) {
      const double fi = f[static_cast<std::size_t>(i)];
      const double bi = b[static_cast<std::size_t>(i - 1)];
      f[static_cast<std::size_t>(i)] = fi + k * bi;
      b[static_cast<std::size_t>(i)] = bi + k * fi;
    }
  }
  return std::vector<double>(a.begin() + 1, a.end());
}

// Roots of z^p + a1 z^(p-1) + ... + ap via the companion matrix.
inline std::vector<std::complex<double>> PolynomialRoots(const std::vector<double> &a) {
  const int p = static_cast<int>(a.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < p; ++j) companion(0, j) = -a[static_cast<std::size_t>(j)];
  for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  std::vector<std::complex<double>> roots(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) roots[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return roots;
}

}  // namespace formant_detail

/**
   LPC formant tracking: downsample to 10 kHz, pre-emphasize, slide a 25 ms
   Gaussian-windowed frame every 10 ms, fit a 12th-order Burg LPC model, and
   convert the upper-half-plane roots to (frequency, bandwidth) candidates.
   A frame is reliable when it is voiced and the three lowest candidates fall
   in (90, 4900) Hz with bandwidth under 400 Hz.
*/
inline FormantTrack ExtractFormants(const AudioBuffer &audio) {
  // voicing gate on the original signal, wide F0 range
  const PitchConfig voicing_config = DefaultPitchConfig();
  PitchTrack pitch;
  bool have_pitch = false;
  if (audio.samples.size() >= static_cast<std::size_t>(std::lround(
                                  3.0 * audio.sample_rate_hz / voicing_config.floor_hz))) {
    pitch = TrackF0(audio, voicing_config);
    have_pitch = true;
  }
  auto voiced_at = [&](double time_s) {
    if (!have_pitch || pitch.NumFrames() == 0) return false;
    const double step = pitch.frame_times_s.size() > 1
                            ? pitch.frame_times_s[1] - pitch.frame_times_s[0]
                            : 1.0;
    long idx = std::lround((time_s - pitch.frame_times_s.front()) / step);
    idx = std::clamp<long>(idx, 0, static_cast<long>(pitch.NumFrames()) - 1);
    return pitch.Voiced(static_cast<std::size_t>(idx));
  };

  const AudioBuffer low = Resample(audio, static_cast<int>(formant_detail::kAnalysisRateHz), 64);
  std::vector<double> emphasized(low.samples.size());
  for (std::size_t n = 0; n < low.samples.size(); ++n) {
    const double prev = (n == 0) ? low.samples[0] : low.samples[n - 1];
    emphasized[n] = low.samples[n] - formant_detail::kPreemphasis * prev;
  }

  const double fs = formant_detail::kAnalysisRateHz;
  const int frame_len = static_cast<int>(std::lround(formant_detail::kFrameS * fs));
  const int hop = static_cast<int>(std::lround(formant_detail::kHopS * fs));
  const int n_frames =
      emphasized.size() >= static_cast<std::size_t>(frame_len)
          ? static_cast<int>((emphasized.size() - frame_len) / hop) + 1
          : 0;
  const std::vector<double> window = GaussianWindow(static_cast<std::size_t>(frame_len));

  FormantTrack track;
  track.frame_times_s.resize(static_cast<std::size_t>(n_frames));
  track.freqs = Eigen::MatrixXd::Zero(n_frames, 3);
  track.reliable.assign(static_cast<std::size_t>(n_frames), 0);

  std::vector<double> frame(static_cast<std::size_t>(frame_len));
  for (int t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    const double time_s = (start + frame_len / 2.0) / fs;
    track.frame_times_s[static_cast<std::size_t>(t)] = time_s;

    double mean = 0.0;
    for (int i = 0; i < frame_len; ++i) mean += emphasized[start + i];
    mean /= frame_len;
    for (int i = 0; i < frame_len; ++i)
      frame[static_cast<std::size_t>(i)] = (emphasized[start + i] - mean) * window[static_cast<std::size_t>(i)];

    const std::vector<double> lpc = formant_detail::BurgLpc(frame, formant_detail::kLpcOrder);
    if (lpc.empty()) continue;
    std::vector<std::pair<double, double>> candidates;  // (freq, bandwidth)
    for (const auto &root : formant_detail::PolynomialRoots(lpc)) {
      if (root.imag() <= 0.0) continue;
      const double freq = std::atan2(root.imag(), root.real()) * fs / (2.0 * kPi);
      const double mag = std::abs(root);
      if (mag <= 0.0 || mag >= 1.0) continue;  // outside the unit disk: not a resonance
      const double bandwidth = -std::log(mag) * fs / kPi;
      if (freq <= formant_detail::kMinFreqHz || freq >= formant_detail::kMaxFreqHz) continue;
      if (bandwidth >= formant_detail::kMaxBandwidthHz) continue;
      candidates.emplace_back(freq, bandwidth);
    }
    std::sort(candidates.begin(), candidates.end());
    if (candidates.size() < 3) continue;
    for (int n = 0; n < 3; ++n) track.freqs(t, n) = candidates[static_cast<std::size_t>(n)].first;
    track.reliable[static_cast<std::size_t>(t)] = voiced_at(time_s) ? 1 : 0;
  }
  return track;
}

struct FormantDifference {
  double d_hz = 0.0;
  int frames_used = 0;  // T': aligned frames where both sides are reliable
};

// Mean absolute formant difference over the aligned, mutually reliable
// frames:  d = (1/(3 T')) sum_t sum_n |f_a(t,n) - f_b(t,n)|.
inline FormantDifference ComputeFormantDifference(const FormantTrack &track_a,
                                                  const FormantTrack &track_b,
                                                  const AlignmentPath &path) {
  FormantDifference out;
  double acc = 0.0;
  for (const auto &[i, j] : path.pairs) {
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= track_a.NumFrames() ||
        static_cast<std::size_t>(j) >= track_b.NumFrames())
      throw DataError("formant_difference: path index out of range");
    if (!track_a.reliable[static_cast<std::size_t>(i)] ||
        !track_b.reliable[static_cast<std::size_t>(j)])
      continue;
    for (int n = 0; n < 3; ++n) acc += std::fabs(track_a.freqs(i, n) - track_b.freqs(j, n));
    ++out.frames_used;
  }
  if (out.frames_used == 0)
    throw DataError("formant_difference: no mutually reliable aligned frames");
  out.d_hz = acc / (3.0 * out.frames_used);
  return out;
}

}  // namespace asvmimic
