// asvmimic/frontend.hpp

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
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asvmimic/audio.hpp"
#include "asvmimic/common.hpp"
#include "asvmimic/dsp.hpp"

namespace asvmimic {

enum class NormKind { kCmvn, kSlidingCmn };

struct SadConfig {
  double dynamic_range_db = 30.0;    // below the utterance max energy
  double absolute_floor_dbfs = -60.0;
  bool use_absolute_floor = true;
};

struct FrontendConfig {
  int n_mfcc = 20;
  int n_mel_filters = 20;
  bool include_deltas = true;
  bool rasta = true;
  NormKind norm = NormKind::kCmvn;
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  double preemphasis = 0.97;
  int sliding_window_frames = 300;
  SadConfig sad;

  void Check() const {
    if (n_mfcc <= 0 || n_mel_filters <= 0 || n_mfcc > n_mel_filters)
      throw DataError("frontend config: need 0 < n_mfcc <= n_mel_filters");
    if (!(frame_ms > hop_ms && hop_ms > 0.0))
      throw DataError("frontend config: need frame_ms > hop_ms > 0");
  }
};

// Frame-synchronous features with per-frame speech flags.
struct FeatureMatrix {
  Eigen::MatrixXd frames;             // T x D
  std::vector<std::uint8_t> speech_flags;  // length T
  std::vector<double> frame_times_s;       // length T, frame centers

  Eigen::Index NumFrames() const { return frames.rows(); }
  Eigen::Index Dim() const { return frames.cols(); }
  int CountSpeechFrames() const {
    int n = 0;
    for (auto f : speech_flags) n += (f != 0);
    return n;
  }
  void CheckFinite(const char *where) const {
    if (!frames.allFinite()) throw NumericError(std::string(where) + ": non-finite features");
  }
};

inline Eigen::Index FrameCount(std::size_t num_samples, int frame_len, int hop) {
  if (num_samples < static_cast<std::size_t>(frame_len)) return 0;
  return 1 + static_cast<Eigen::Index>((num_samples - frame_len) / hop);
}

namespace frontend_detail {

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

// Triangular mel filterbank (HTK-style mel scale), filters spanning 0..fs/2.
// Returns an (nfft/2+1) x n_filters weight matrix.
inline Eigen::MatrixXd MelFilterbank(int n_filters, std::size_t nfft, double sample_rate) {
  const std::size_t n_bins = nfft / 2 + 1;
  const double mel_lo = 0.0;
  const double mel_hi = HzToMel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_filters) + 2);
  for (std::size_t j = 0; j < edges.size(); ++j)
    edges[j] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(j) / (n_filters + 1);

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_bins), n_filters);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double mel_k = HzToMel(static_cast<double>(k) * sample_rate / static_cast<double>(nfft));
    for (int m = 0; m < n_filters; ++m) {
      const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
      double w = 0.0;
      if (mel_k >= left && mel_k <= center)
        w = (mel_k - left) / (center - left);
      else if (mel_k > center && mel_k <= right)
        w = (right - mel_k) / (right - center);
      fb(static_cast<Eigen::Index>(k), m) = std::max(0.0, w);
    }
  }
  return fb;
}

// Orthonormal DCT-II, n_out x n_in.
inline Eigen::MatrixXd DctMatrix(int n_out, int n_in) {
  Eigen::MatrixXd d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double a = (k == 0) ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int m = 0; m < n_in; ++m)
      d(k, m) = a * std::cos(kPi * k * (2.0 * m + 1.0) / (2.0 * n_in));
  }
  return d;
}

inline constexpr double kLogEnergyFloor = 1e-10;

}  // namespace frontend_detail

/**
   MFCC extraction: global pre-emphasis, Hamming-windowed frames, power
   spectrum, triangular mel filterbank over 0..fs/2, log with floor, then an
   orthonormal DCT keeping the first n_mfcc coefficients (c0 included).
*/
inline FeatureMatrix ComputeMfcc(const AudioBuffer &audio, const FrontendConfig &config) {
  config.Check();
  const double fs = audio.sample_rate_hz;
  const int frame_len = static_cast<int>(std::lround(config.frame_ms * fs / 1000.0));
  const int hop = static_cast<int>(std::lround(config.hop_ms * fs / 1000.0));
  const Eigen::Index n_frames = FrameCount(audio.samples.size(), frame_len, hop);
  if (n_frames == 0) throw DataError("audio shorter than one analysis frame");

  std::vector<double> emphasized(audio.samples.size());
  for (std::size_t n = 0; n < audio.samples.size(); ++n) {
    const double prev = (n == 0) ? audio.samples[0] : audio.samples[n - 1];
    emphasized[n] = audio.samples[n] - config.preemphasis * prev;
  }

  const std::size_t nfft = NextPowerOfTwo(static_cast<std::size_t>(frame_len));
  const std::vector<double> window = HammingWindow(static_cast<std::size_t>(frame_len));
  const Eigen::MatrixXd fb =
      frontend_detail::MelFilterbank(config.n_mel_filters, nfft, fs);
  const Eigen::MatrixXd dct = frontend_detail::DctMatrix(config.n_mfcc, config.n_mel_filters);

  FeatureMatrix out;
  out.frames.resize(n_frames, config.n_mfcc);
  out.speech_flags.assign(static_cast<std::size_t>(n_frames), 1);
  out.frame_times_s.resize(static_cast<std::size_t>(n_frames));

  std::vector<double> frame(static_cast<std::size_t>(frame_len));
  Eigen::VectorXd power(static_cast<Eigen::Index>(nfft / 2 + 1));
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < frame_len; ++i) frame[static_cast<std::size_t>(i)] = emphasized[start + i] * window[i];
    const std::vector<double> p = PowerSpectrum(frame, nfft);
    for (std::size_t k = 0; k < p.size(); ++k) power(static_cast<Eigen::Index>(k)) = p[k];
    Eigen::VectorXd mel = fb.transpose() * power;
    for (Eigen::Index m = 0; m < mel.size(); ++m)
      mel(m) = std::log(std::max(mel(m), frontend_detail::kLogEnergyFloor));
    out.frames.row(t) = (dct * mel).transpose();
    out.frame_times_s[static_cast<std::size_t>(t)] = (start + frame_len / 2.0) / fs;
  }
  out.CheckFinite("compute_mfcc");
  return out;
}

// Regression deltas with edge replication; output is [x, dx, ddx].
inline FeatureMatrix AppendDeltas(const FeatureMatrix &feat, int window = 2) {
  const Eigen::Index t_count = feat.NumFrames(), d = feat.Dim();
  if (t_count < 2 * window + 1)
    throw DataError("append_deltas: too few frames for the delta window");
  double denom = 0.0;
  for (int k = 1; k <= window; ++k) denom += 2.0 * k * k;

  auto regression = [&](const Eigen::MatrixXd &x) {
    Eigen::MatrixXd out(t_count, d);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
      for (int k = 1; k <= window; ++k) {
        const Eigen::Index fwd = std::min(t + k, t_count - 1);
        const Eigen::Index bwd = std::max<Eigen::Index>(t - k, 0);
        acc += k * (x.row(fwd) - x.row(bwd));
      }
      out.row(t) = acc / denom;
    }
    return out;
  };

  const Eigen::MatrixXd delta = regression(feat.frames);
  const Eigen::MatrixXd delta2 = regression(delta);
  FeatureMatrix out;
  out.frames.resize(t_count, 3 * d);
  out.frames << feat.frames, delta, delta2;
  out.speech_flags = feat.speech_flags;
  out.frame_times_s = feat.frame_times_s;
  return out;
}

/**
   RASTA band-pass along time, applied to each dimension independently:

     y[t] = 0.94 y[t-1] + (2 x[t] + x[t-1] - x[t-3] - 2 x[t-4]) / 6

   with zero initial state.  The numerator sums to zero, so the DC gain is
   zero and constant trajectories decay to nothing.
*/
inline FeatureMatrix RastaFilter(const FeatureMatrix &feat) {
  constexpr double kPole = 0.94;
  const Eigen::Index t_count = feat.NumFrames(), d = feat.Dim();
  FeatureMatrix out;
  out.frames.resize(t_count, d);
  out.speech_flags = feat.speech_flags;
  out.frame_times_s = feat.frame_times_s;
  for (Eigen::Index j = 0; j < d; ++j) {
    double y_prev = 0.0;
    for (Eigen::Index t = 0; t < t_count; ++t) {
      auto x = [&](Eigen::Index i) { return i >= 0 ? feat.frames(i, j) : 0.0; };
      const double y =
          kPole * y_prev + (2.0 * x(t) + x(t - 1) - x(t - 3) - 2.0 * x(t - 4)) / 6.0;
      out.frames(t, j) = y;
      y_prev = y;
    }
  }
  return out;
}

// Energy SAD on the raw (un-emphasized) signal.  A frame is speech when its
// energy is within dynamic_range_db of the utterance maximum and, when the
// absolute floor is enabled, above absolute_floor_dbfs.
inline std::vector<std::uint8_t> SadEnergy(const AudioBuffer &audio,
                                           const FrontendConfig &config) {
  const double fs = audio.sample_rate_hz;
  const int frame_len = static_cast<int>(std::lround(config.frame_ms * fs / 1000.0));
  const int hop = static_cast<int>(std::lround(config.hop_ms * fs / 1000.0));
  const Eigen::Index n_frames = FrameCount(audio.samples.size(), frame_len, hop);
  std::vector<double> energy_db(static_cast<std::size_t>(n_frames));
  double max_db = -1e30;
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    double acc = 0.0;
    for (int i = 0; i < frame_len; ++i) acc += audio.samples[start + i] * audio.samples[start + i];
    const double mean_sq = acc / frame_len;
    energy_db[static_cast<std::size_t>(t)] = mean_sq > 0.0 ? 10.0 * std::log10(mean_sq) : -1e30;
    max_db = std::max(max_db, energy_db[static_cast<std::size_t>(t)]);
  }
  double threshold = max_db - config.sad.dynamic_range_db;
  if (config.sad.use_absolute_floor)
    threshold = std::max(threshold, config.sad.absolute_floor_dbfs);
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(n_frames));
  for (std::size_t t = 0; t < flags.size(); ++t) flags[t] = energy_db[t] > threshold ? 1 : 0;
  return flags;
}

// Cepstral mean and variance normalization.  Statistics come from speech
// frames only (population variance); every frame is transformed with them.
inline FeatureMatrix Cmvn(const FeatureMatrix &feat) {
  const Eigen::Index t_count = feat.NumFrames(), d = feat.Dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  int n_speech = 0;
  for (Eigen::Index t = 0; t < t_count; ++t) {
    if (!feat.speech_flags[static_cast<std::size_t>(t)]) continue;
    ++n_speech;
    mean += feat.frames.row(t).transpose();
    sq += feat.frames.row(t).transpose().cwiseProduct(feat.frames.row(t).transpose());
  }
  if (n_speech < 2) throw DataError("cmvn: need at least 2 speech frames");
  mean /= n_speech;
  Eigen::VectorXd var = sq / n_speech - mean.cwiseProduct(mean);
  bool floored = false;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (var(j) < 1e-12) {
      var(j) = 1e-12;
      floored = true;
    }
  }
  if (floored) Warn("cmvn: zero-variance dimension floored");
  const Eigen::VectorXd inv_std = var.cwiseSqrt().cwiseInverse();

  FeatureMatrix out;
  out.frames.resize(t_count, d);
  for (Eigen::Index t = 0; t < t_count; ++t)
    out.frames.row(t) =
        (feat.frames.row(t).transpose() - mean).cwiseProduct(inv_std).transpose();
  out.speech_flags = feat.speech_flags;
  out.frame_times_s = feat.frame_times_s;
  return out;
}

// Sliding cepstral mean subtraction.  The window keeps its full width by
// shifting at the edges (and covers everything when T <= window), so short
// inputs reduce to global mean subtraction.  No variance normalization.
inline FeatureMatrix SlidingCmn(const FeatureMatrix &feat, int window_frames = 300) {
  const Eigen::Index t_count = feat.NumFrames(), d = feat.Dim();
  if (t_count < 1) throw DataError("sliding_cmn: empty features");
  FeatureMatrix out;
  out.frames.resize(t_count, d);
  out.speech_flags = feat.speech_flags;
  out.frame_times_s = feat.frame_times_s;
  for (Eigen::Index t = 0; t < t_count; ++t) {
    Eigen::Index begin = t - window_frames / 2;
    Eigen::Index end = begin + window_frames;
    if (begin < 0) {
      begin = 0;
      end = std::min<Eigen::Index>(window_frames, t_count);
    }
    if (end > t_count) {
      end = t_count;
      begin = std::max<Eigen::Index>(0, t_count - window_frames);
    }
    const Eigen::RowVectorXd mean =
        feat.frames.middleRows(begin, end - begin).colwise().mean();
    out.frames.row(t) = feat.frames.row(t) - mean;
  }
  return out;
}

// Full per-profile feature chain.
//   deltas+rasta+cmvn profile:   MFCC -> RASTA -> deltas -> SAD mask -> CMVN
//   sliding-CMN profile:         MFCC -> sliding CMN -> SAD mask
inline FeatureMatrix ComputeFrontend(const AudioBuffer &audio, const FrontendConfig &config) {
  FeatureMatrix feat = ComputeMfcc(audio, config);
  if (config.rasta) feat = RastaFilter(feat);
  if (config.include_deltas) feat = AppendDeltas(feat);
  if (config.norm == NormKind::kSlidingCmn)
    feat = SlidingCmn(feat, config.sliding_window_frames);
  feat.speech_flags = SadEnergy(audio, config);
  if (config.norm == NormKind::kCmvn) feat = Cmvn(feat);
  feat.CheckFinite("frontend");
  return feat;
}

// --- feature export ------------------------------------------------------

inline constexpr char kFeatureMagic[4] = {'A', 'S', 'V', 'F'};

// Binary matrix format: magic, version, dims, count, dtype (0 = f64), then
// row-major frame data, the speech flags, and the frame times.
inline void WriteFeaturesBinary(const std::string &path, const FeatureMatrix &feat) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write feature file: " + path);
  os.write(kFeatureMagic, 4);
  const std::uint32_t version = 1, dims = static_cast<std::uint32_t>(feat.Dim()),
                      count = static_cast<std::uint32_t>(feat.NumFrames());
  const std::uint8_t dtype = 0;
  auto put32 = [&](std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
  };
  put32(version);
  put32(dims);
  put32(count);
  os.put(static_cast<char>(dtype));
  for (Eigen::Index t = 0; t < feat.NumFrames(); ++t)
    for (Eigen::Index j = 0; j < feat.Dim(); ++j) {
      const double v = feat.frames(t, j);
      os.write(reinterpret_cast<const char *>(&v), 8);
    }
  for (auto f : feat.speech_flags) os.put(static_cast<char>(f));
  for (double tsec : feat.frame_times_s)
    os.write(reinterpret_cast<const char *>(&tsec), 8);
  if (!os) throw DataError("short write on feature file: " + path);
}

inline FeatureMatrix ReadFeaturesBinary(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw DataError("not a feature file: " + path);
  auto get32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char *>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  const std::uint32_t version = get32();
  if (version != 1) throw DataError("feature file version mismatch: " + path);
  const std::uint32_t dims = get32(), count = get32();
  const int dtype = in.get();
  if (dtype != 0) throw DataError("unsupported feature dtype: " + path);
  FeatureMatrix feat;
  feat.frames.resize(count, dims);
  for (std::uint32_t t = 0; t < count; ++t)
    for (std::uint32_t j = 0; j < dims; ++j) {
      double v;
      in.read(reinterpret_cast<char *>(&v), 8);
      feat.frames(t, j) = v;
    }
  feat.speech_flags.resize(count);
  for (std::uint32_t t = 0; t < count; ++t) feat.speech_flags[t] = static_cast<std::uint8_t>(in.get());
  feat.frame_times_s.resize(count);
  for (std::uint32_t t = 0; t < count; ++t)
    in.read(reinterpret_cast<char *>(&feat.frame_times_s[t]), 8);
  if (!in) throw DataError("truncated feature file: " + path);
  return feat;
}

inline void WriteFeaturesCsv(const std::string &path, const FeatureMatrix &feat) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write feature CSV: " + path);
  os << "time_s,speech";
  for (Eigen::Index j = 0; j < feat.Dim(); ++j) os << ",d" << j;
  os << "\n";
  os.precision(17);
  for (Eigen::Index t = 0; t < feat.NumFrames(); ++t) {
    os << feat.frame_times_s[static_cast<std::size_t>(t)] << ','
       << static_cast<int>(feat.speech_flags[static_cast<std::size_t>(t)]);
    for (Eigen::Index j = 0; j < feat.Dim(); ++j) os << ',' << feat.frames(t, j);
    os << "\n";
  }
}

}  // namespace asvmimic
