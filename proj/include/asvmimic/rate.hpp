// asvmimic/rate.hpp

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
#include <vector>

#include "asvmimic/audio.hpp"
#include "asvmimic/common.hpp"
#include "asvmimic/pitch.hpp"

namespace asvmimic {

struct SpeakingRate {
  double syllables_per_second = 0.0;
  int nucleus_count = 0;
  double phonation_time_s = 0.0;  // speech time excluding detected pauses
};

namespace rate_detail {

inline constexpr double kWindowS = 0.064;
inline constexpr double kHopS = 0.016;
inline constexpr double kDipDb = 2.0;        // required dip on both sides of a nucleus
inline constexpr double kPauseBelowMaxDb = 25.0;

}  // namespace rate_detail

/**
   Syllable-rate estimation by intensity-peak (nucleus) counting: the dB
   intensity contour (64 ms window, 16 ms hop) proposes local maxima above
   the median intensity; a peak counts as a syllable nucleus when a dip of at
   least 2 dB separates it from its neighbours on both sides and the peak
   frame is voiced according to the pitch tracker.  The rate is nuclei per
   second of total duration; phonation time excludes frames more than 25 dB
   below the utterance maximum.
*/
inline SpeakingRate EstimateSpeakingRate(const AudioBuffer &audio) {
  if (audio.DurationSeconds() < 0.5)
    throw DataError("speaking_rate: need at least 0.5 s of audio");
  const double fs = audio.sample_rate_hz;
  const int window = static_cast<int>(std::lround(rate_detail::kWindowS * fs));
  const int hop = static_cast<int>(std::lround(rate_detail::kHopS * fs));
  const int n_frames = static_cast<int>((audio.samples.size() - window) / hop) + 1;

  std::vector<double> intensity_db(static_cast<std::size_t>(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    double acc = 0.0;
    for (int i = 0; i < window; ++i) acc += audio.samples[start + i] * audio.samples[start + i];
    intensity_db[static_cast<std::size_t>(t)] = 10.0 * std::log10(acc / window + 1e-12);
  }
  std::vector<double> sorted = intensity_db;
  std::sort(sorted.begin(), sorted.end());
  const double median_db = (n_frames % 2 == 1)
                               ? sorted[static_cast<std::size_t>(n_frames / 2)]
                               : 0.5 * (sorted[static_cast<std::size_t>(n_frames / 2 - 1)] +
                                        sorted[static_cast<std::size_t>(n_frames / 2)]);
  const double max_db = sorted.back();

  // candidate peaks: strict local maxima above the median
  std::vector<int> candidates;
  for (int t = 1; t + 1 < n_frames; ++t) {
    const double here = intensity_db[static_cast<std::size_t>(t)];
    if (here <= median_db) continue;
    if (here > intensity_db[static_cast<std::size_t>(t - 1)] &&
        here >= intensity_db[static_cast<std::size_t>(t + 1)])
      candidates.push_back(t);
  }

  PitchTrack pitch;
  bool have_pitch = false;
  const PitchConfig voicing_config = DefaultPitchConfig();
  if (audio.samples.size() >=
      static_cast<std::size_t>(std::lround(3.0 * fs / voicing_config.floor_hz))) {
    pitch = TrackF0(audio, voicing_config);
    have_pitch = true;
  }
  auto voiced_at = [&](double time_s) {
    if (!have_pitch || pitch.NumFrames() == 0) return false;
    // nearest pitch frame
    const double step = pitch.frame_times_s.size() > 1
                            ? pitch.frame_times_s[1] - pitch.frame_times_s[0]
                            : 1.0;
    const double first = pitch.frame_times_s.front();
    long idx = std::lround((time_s - first) / step);
    idx = std::clamp<long>(idx, 0, static_cast<long>(pitch.NumFrames()) - 1);
    return pitch.Voiced(static_cast<std::size_t>(idx));
  };

  auto min_between = [&](int a, int b) {  // inclusive interval
    double m = 1e300;
    for (int t = a; t <= b; ++t) m = std::min(m, intensity_db[static_cast<std::size_t>(t)]);
    return m;
  };

  SpeakingRate out;
  int prev_accepted = 0;  // search dips from the start of the signal
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const int t = candidates[k];
    const int next = (k + 1 < candidates.size()) ? candidates[k + 1] : n_frames - 1;
    const double peak = intensity_db[static_cast<std::size_t>(t)];
    const double dip_before = min_between(prev_accepted, t);
    const double dip_after = min_between(t, next);
    if (peak - dip_before < rate_detail::kDipDb) continue;
    if (peak - dip_after < rate_detail::kDipDb) continue;
    const double time_s = (static_cast<double>(t) * hop + window / 2.0) / fs;
    if (!voiced_at(time_s)) continue;
    ++out.nucleus_count;
    prev_accepted = t;
  }

  int speech_frames = 0;
  for (double v : intensity_db)
    if (v > max_db - rate_detail::kPauseBelowMaxDb) ++speech_frames;
  out.phonation_time_s = static_cast<double>(speech_frames) * rate_detail::kHopS;
  out.syllables_per_second = out.nucleus_count / audio.DurationSeconds();
  return out;
}

}  // namespace asvmimic
