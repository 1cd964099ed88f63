// asvmimic/pitch.hpp

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

#include "asvmimic/audio.hpp"
#include "asvmimic/common.hpp"
#include "asvmimic/dsp.hpp"

namespace asvmimic {

struct PitchConfig {
  double floor_hz = 75.0;    // [75, 200] male, [100, 300] female
  double ceiling_hz = 200.0;
  double timestep_s = 0.010;
  double silence_threshold = 0.03;   // relative to the utterance peak
  double voicing_threshold = 0.45;
  double octave_cost = 0.01;
  double octave_jump_cost = 0.35;
  double vuv_cost = 0.14;
  int max_candidates = 15;

  void Check() const {
    if (!(floor_hz < ceiling_hz) || floor_hz <= 0.0)
      throw DataError("pitch config: need 0 < floor < ceiling");
    if (octave_cost < 0 || octave_jump_cost < 0 || vuv_cost < 0 || max_candidates < 2)
      throw DataError("pitch config: invalid costs");
  }
};

inline PitchConfig MalePitchConfig() { return PitchConfig{}; }
inline PitchConfig FemalePitchConfig() {
  PitchConfig c;
  c.floor_hz = 100.0;
  c.ceiling_hz = 300.0;
  return c;
}
// Wide range used where the speaker is unknown (voicing gates).
inline PitchConfig DefaultPitchConfig() {
  PitchConfig c;
  c.floor_hz = 75.0;
  c.ceiling_hz = 600.0;
  return c;
}

struct PitchTrack {
  std::vector<double> frame_times_s;
  std::vector<double> f0_hz;      // 0 marks an unvoiced frame
  std::vector<double> strengths;  // chosen candidate's correlation height

  std::size_t NumFrames() const { return f0_hz.size(); }
  bool Voiced(std::size_t t) const { return f0_hz[t] > 0.0; }
  std::vector<double> VoicedValues() const {
    std::vector<double> v;
    for (double f : f0_hz)
      if (f > 0.0) v.push_back(f);
    return v;
  }
};

namespace pitch_detail {

struct Candidate {
  double f0 = 0.0;       // 0 = unvoiced candidate
  double strength = 0.0;
};

// Raw autocorrelation r[0..max_lag] of a frame via FFT.
inline std::vector<double> Autocorrelation(const std::vector<double> &frame, int max_lag) {
  const std::size_t nfft = NextPowerOfTwo(frame.size() + static_cast<std::size_t>(max_lag) + 1);
  std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  Fft(buf);
  for (auto &c : buf) c = std::complex<double>(std::norm(c), 0.0);
  Fft(buf, true);
  std::vector<double> r(static_cast<std::size_t>(max_lag) + 1);
  for (int tau = 0; tau <= max_lag; ++tau)
    r[static_cast<std::size_t>(tau)] = buf[static_cast<std::size_t>(tau)].real() / static_cast<double>(nfft);
  return r;
}

}  // namespace pitch_detail

/**
   Autocorrelation pitch tracker in the style of the classic Praat method:
   per frame, the window-normalized autocorrelation proposes lag candidates
   (parabolic peak interpolation, strength penalized by
   octave_cost * log2(ceiling * lag)); a quiet frame biases toward the
   unvoiced candidate through the silence threshold; the final path maximizes
   total strength minus octave-jump and voicing-transition costs by dynamic
   programming over the whole utterance.
*/
inline PitchTrack TrackF0(const AudioBuffer &audio, const PitchConfig &config) {
  config.Check();
  const double fs = audio.sample_rate_hz;
  const int window = static_cast<int>(std::lround(3.0 * fs / config.floor_hz));
  if (audio.samples.size() < static_cast<std::size_t>(window))
    throw DataError("track_f0: need at least 3/floor_hz seconds of audio");
  const int step = std::max(1, static_cast<int>(std::lround(config.timestep_s * fs)));
  const int n_frames = static_cast<int>((audio.samples.size() - window) / step) + 1;
  const int lag_min = std::max(2, static_cast<int>(std::floor(fs / config.ceiling_hz)));
  const int lag_max = static_cast<int>(std::ceil(fs / config.floor_hz));

  double global_peak = 0.0;
  for (double s : audio.samples) global_peak = std::max(global_peak, std::fabs(s));

  const std::vector<double> hann = HannWindow(static_cast<std::size_t>(window));
  const std::vector<double> r_window = pitch_detail::Autocorrelation(hann, lag_max + 1);

  std::vector<std::vector<pitch_detail::Candidate>> frame_candidates(
      static_cast<std::size_t>(n_frames));
  PitchTrack track;
  track.frame_times_s.resize(static_cast<std::size_t>(n_frames));

  std::vector<double> seg(static_cast<std::size_t>(window));
  for (int t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * step;
    track.frame_times_s[static_cast<std::size_t>(t)] = (start + window / 2.0) / fs;

    double mean = 0.0;
    for (int i = 0; i < window; ++i) mean += audio.samples[start + i];
    mean /= window;
    double local_peak = 0.0;
    for (int i = 0; i < window; ++i) {
      seg[static_cast<std::size_t>(i)] = (audio.samples[start + i] - mean) * hann[static_cast<std::size_t>(i)];
      local_peak = std::max(local_peak, std::fabs(audio.samples[start + i] - mean));
    }

    auto &cands = frame_candidates[static_cast<std::size_t>(t)];
    // unvoiced candidate; silence pushes its strength up to VT + 2
    double silence_bias = 2.0;
    if (global_peak > 0.0)
      silence_bias = std::max(
          0.0, 2.0 - (local_peak / global_peak) /
                         (config.silence_threshold / (1.0 + config.voicing_threshold)));
    cands.push_back({0.0, config.voicing_threshold + silence_bias});

    const std::vector<double> r = pitch_detail::Autocorrelation(seg, lag_max + 1);
    if (r[0] <= 0.0) continue;  // silent frame: unvoiced only

    std::vector<pitch_detail::Candidate> voiced;
    for (int tau = lag_min; tau <= lag_max && tau + 1 < static_cast<int>(r.size()); ++tau) {
      auto rn = [&](int l) {
        return (r[static_cast<std::size_t>(l)] / r[0]) /
               (r_window[static_cast<std::size_t>(l)] / r_window[0]);
      };
      const double prev = rn(tau - 1), here = rn(tau), next = rn(tau + 1);
      if (!(here >= prev && here >= next)) continue;
      // parabolic interpolation around the peak
      const double denom = prev - 2.0 * here + next;
      double delta = 0.0;
      if (denom < 0.0) delta = 0.5 * (prev - next) / denom;
      delta = std::clamp(delta, -0.5, 0.5);
      double lag = std::clamp(static_cast<double>(tau) + delta,
                              static_cast<double>(lag_min), static_cast<double>(lag_max));
      double height = here - 0.25 * (prev - next) * delta;
      height = std::min(height, 1.0);
      const double penalty = config.octave_cost * std::log2(config.ceiling_hz * lag / fs);
      voiced.push_back({fs / lag, height - penalty});
    }
    std::stable_sort(voiced.begin(), voiced.end(),
                     [](const pitch_detail::Candidate &a, const pitch_detail::Candidate &b) {
                       return a.strength > b.strength;
                     });
    for (std::size_t i = 0; i < voiced.size() &&
                            i + 1 < static_cast<std::size_t>(config.max_candidates);
         ++i)
      cands.push_back(voiced[i]);
  }

  // Viterbi over candidates: maximize strengths minus transition costs.
  std::vector<std::vector<double>> score(static_cast<std::size_t>(n_frames));
  std::vector<std::vector<int>> back(static_cast<std::size_t>(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    const auto &cands = frame_candidates[static_cast<std::size_t>(t)];
    score[static_cast<std::size_t>(t)].resize(cands.size());
    back[static_cast<std::size_t>(t)].resize(cands.size(), -1);
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (t == 0) {
        score[0][c] = cands[c].strength;
        continue;
      }
      const auto &prev_cands = frame_candidates[static_cast<std::size_t>(t - 1)];
      double best = -1e300;
      int best_prev = 0;
      for (std::size_t p = 0; p < prev_cands.size(); ++p) {
        double transition = 0.0;
        const bool pv = prev_cands[p].f0 > 0.0, cv = cands[c].f0 > 0.0;
        if (pv != cv)
          transition = config.vuv_cost;
        else if (pv && cv)
          transition = config.octave_jump_cost * std::fabs(std::log2(prev_cands[p].f0 / cands[c].f0));
        const double s = score[static_cast<std::size_t>(t - 1)][p] - transition;
        if (s > best) {
          best = s;
          best_prev = static_cast<int>(p);
        }
      }
      score[static_cast<std::size_t>(t)][c] = best + cands[c].strength;
      back[static_cast<std::size_t>(t)][c] = best_prev;
    }
  }

  track.f0_hz.assign(static_cast<std::size_t>(n_frames), 0.0);
  track.strengths.assign(static_cast<std::size_t>(n_frames), 0.0);
  int choice = 0;
  {
    const auto &last = score[static_cast<std::size_t>(n_frames - 1)];
    for (std::size_t c = 1; c < last.size(); ++c)
      if (last[c] > last[static_cast<std::size_t>(choice)]) choice = static_cast<int>(c);
  }
  for (int t = n_frames - 1; t >= 0; --t) {
    const auto &cand = frame_candidates[static_cast<std::size_t>(t)][static_cast<std::size_t>(choice)];
    track.f0_hz[static_cast<std::size_t>(t)] = cand.f0;
    track.strengths[static_cast<std::size_t>(t)] = cand.strength;
    choice = back[static_cast<std::size_t>(t)][static_cast<std::size_t>(choice)];
  }
  return track;
}

struct F0Summary {
  double median_hz = 0.0;
  double std_hz = 0.0;  // population standard deviation
  int voiced_frames = 0;
};

// Median and population standard deviation over voiced frames only.
inline F0Summary SummarizeF0(const PitchTrack &track) {
  std::vector<double> v = track.VoicedValues();
  if (v.empty()) throw DataError("f0_summary: track is fully unvoiced");
  std::sort(v.begin(), v.end());
  F0Summary s;
  s.voiced_frames = static_cast<int>(v.size());
  const std::size_t n = v.size();
  s.median_hz = (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double mean = 0.0;
  for (double f : v) mean += f;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double f : v) var += (f - mean) * (f - mean);
  s.std_hz = std::sqrt(var / static_cast<double>(n));
  return s;
}

}  // namespace asvmimic
