// tests/helpers.hpp

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "asvmimic/audio.hpp"
#include "asvmimic/dsp.hpp"
#include "asvmimic/frontend.hpp"

namespace testutil {

inline asvmimic::AudioBuffer Tone(double freq_hz, double duration_s, int fs,
                                  double amplitude = 0.5) {
  asvmimic::AudioBuffer a;
  a.sample_rate_hz = fs;
  const std::size_t n = static_cast<std::size_t>(duration_s * fs);
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = amplitude * std::sin(2.0 * asvmimic::kPi * freq_hz *
                                        static_cast<double>(i) / fs);
  return a;
}

inline asvmimic::AudioBuffer Noise(double duration_s, int fs, std::uint64_t seed,
                                   double amplitude = 0.3) {
  asvmimic::AudioBuffer a;
  a.sample_rate_hz = fs;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = static_cast<std::size_t>(duration_s * fs);
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = amplitude * u(rng);
  return a;
}

inline asvmimic::AudioBuffer Silence(double duration_s, int fs) {
  asvmimic::AudioBuffer a;
  a.sample_rate_hz = fs;
  a.samples.assign(static_cast<std::size_t>(duration_s * fs), 0.0);
  return a;
}

// Periodic vowel-like signal: impulse train through three resonators.
inline asvmimic::AudioBuffer PeriodicVowel(double f0_hz, double duration_s, int fs,
                                           double r1 = 500.0, double r2 = 1500.0,
                                           double r3 = 2500.0) {
  asvmimic::AudioBuffer a;
  a.sample_rate_hz = fs;
  const std::size_t n = static_cast<std::size_t>(duration_s * fs);
  a.samples.assign(n, 0.0);
  struct Biquad {
    double a1, a2, g, z1 = 0.0, z2 = 0.0;
    Biquad(double f, double bw, double fs_hz) {
      const double r = std::exp(-asvmimic::kPi * bw / fs_hz);
      const double th = 2.0 * asvmimic::kPi * f / fs_hz;
      a1 = 2.0 * r * std::cos(th);
      a2 = -r * r;
      g = (1.0 - r);
    }
    double Step(double x) {
      const double y = g * x + a1 * z1 + a2 * z2;
      z2 = z1;
      z1 = y;
      return y;
    }
  };
  Biquad b1(r1, 80.0, fs), b2(r2, 90.0, fs), b3(r3, 110.0, fs);
  double phase = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    phase += f0_hz / fs;
    double e = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      e = 1.0;
    }
    a.samples[i] = b3.Step(b2.Step(b1.Step(e)));
  }
  double peak = 1e-12;
  for (double s : a.samples) peak = std::max(peak, std::fabs(s));
  for (auto &s : a.samples) s *= 0.4 / peak;
  return a;
}

inline asvmimic::FeatureMatrix RandomFeatures(int frames, int dim, std::uint64_t seed) {
  asvmimic::FeatureMatrix f;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  f.frames.resize(frames, dim);
  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < dim; ++j) f.frames(t, j) = g(rng);
  f.speech_flags.assign(static_cast<std::size_t>(frames), 1);
  f.frame_times_s.resize(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) f.frame_times_s[static_cast<std::size_t>(t)] = 0.01 * t;
  return f;
}

class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("asvmimic_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string Path(const std::string &name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
