// asvmimic/synth.hpp

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

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "asvmimic/audio.hpp"
#include "asvmimic/common.hpp"
#include "asvmimic/manifest.hpp"
#include "asvmimic/store.hpp"

namespace asvmimic {

/**
   Seeded synthetic corpus with known ground truth.

   Every speaker is a source-filter voice: a pulse-train excitation at a
   speaker-specific F0 runs through four resonators at speaker-specific
   center frequencies, gated by a syllable on/off envelope at a
   speaker-specific rate.  Targets record `utterances_per_target` wild
   utterances (the last `prompts` of them carry shared prompt ids);
   attackers record natural takes plus one zero-effort and one mimicry take
   per prompt.  Mimicry morphs the attacker's parameters halfway toward its
   nearest target in parameter space (the ASV-assisted assignment does not
   exist yet at generation time).  Target-side utterances get mild random
   channel tilt and level variation to emulate in-the-wild conditions.
*/
struct SynthOptions {
  int num_speakers = 50;
  int num_attackers = 5;
  int utterances_per_target = 10;
  int natural_per_attacker = 8;
  int prompts = 6;
  int sample_rate_hz = 16000;
  double native_fraction = 0.5;  // fraction of targets tagged with the attackers' nationality
  double mimic_morph = 0.5;
  std::uint64_t seed = 7;
  // partition scheme: this fraction of targets feeds each profile's training
  double train_fraction_per_profile = 0.44;
};

namespace synth_detail {

struct VoiceParams {
  double f0_base = 120.0;
  std::array<double, 4> formants{500.0, 1500.0, 2500.0, 3500.0};
  std::array<double, 4> bandwidths{80.0, 90.0, 110.0, 130.0};
  double syllable_rate = 4.0;  // per second
  Gender gender = Gender::kMale;

  VoiceParams MorphToward(const VoiceParams &other, double amount) const {
    VoiceParams out = *this;
    out.f0_base += amount * (other.f0_base - f0_base);
    for (int i = 0; i < 4; ++i) {
      out.formants[static_cast<std::size_t>(i)] +=
          amount * (other.formants[static_cast<std::size_t>(i)] - formants[static_cast<std::size_t>(i)]);
      out.bandwidths[static_cast<std::size_t>(i)] +=
          amount * (other.bandwidths[static_cast<std::size_t>(i)] - bandwidths[static_cast<std::size_t>(i)]);
    }
    out.syllable_rate += amount * (other.syllable_rate - syllable_rate);
    return out;
  }

  // normalized distance used to pick each attacker's mimic target
  double DistanceTo(const VoiceParams &other) const {
    double d = std::pow((f0_base - other.f0_base) / 50.0, 2.0);
    for (int i = 0; i < 4; ++i)
      d += std::pow((formants[static_cast<std::size_t>(i)] -
                     other.formants[static_cast<std::size_t>(i)]) /
                        500.0,
                    2.0);
    return d;
  }
};

inline std::uint64_t MixSeed(std::uint64_t seed, const std::string &tag) {
  return seed ^ Fnv1a64(tag);
}

// Voices live on a low-dimensional manifold: one dominant vocal-tract-length
// factor scales all formants together (gender shifts its range), plus small
// per-speaker idiosyncrasies.  Nearby factors mean genuinely similar voices,
// which gives the corpus a similarity structure that any spectral system
// should rank consistently.
inline VoiceParams SampleVoice(std::uint64_t seed, const std::string &speaker_id, bool male,
                               bool is_attacker = false) {
  std::mt19937_64 rng(MixSeed(seed, "voice/" + speaker_id));
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  VoiceParams v;
  v.gender = male ? Gender::kMale : Gender::kFemale;
  (void)is_attacker;
  const double tract = male ? uniform(0.0, 0.62) : uniform(0.38, 1.0);
  const double scale = 0.82 + 0.36 * tract;  // formant scaling, ~short to long tract
  const double pattern = uniform(-1.0, 1.0);  // second axis: formant-pattern tilt
  const std::array<double, 4> nominal{520.0, 1450.0, 2550.0, 3700.0};
  const std::array<double, 4> tilt{0.10, -0.06, 0.05, -0.03};
  for (int i = 0; i < 4; ++i)
    v.formants[static_cast<std::size_t>(i)] =
        nominal[static_cast<std::size_t>(i)] * scale *
        (1.0 + tilt[static_cast<std::size_t>(i)] * pattern) * uniform(0.99, 1.01);
  // longer tract, lower pitch: F0 rides the same factor so spectral and
  // pitch cues agree on who sounds close to whom
  v.f0_base = (male ? 120.0 : 210.0) * (1.12 - 0.24 * tract) * uniform(0.97, 1.03);
  v.bandwidths = {uniform(60.0, 100.0), uniform(70.0, 110.0), uniform(90.0, 130.0),
                  uniform(110.0, 150.0)};
  v.syllable_rate = uniform(2.5, 5.5);
  return v;
}

// Two-pole resonator section, gain-normalized at the resonance.
struct Resonator {
  double a1 = 0.0, a2 = 0.0, gain = 1.0;
  double z1 = 0.0, z2 = 0.0;

  Resonator(double freq_hz, double bandwidth_hz, double fs) {
    const double r = std::exp(-kPi * bandwidth_hz / fs);
    const double theta = 2.0 * kPi * freq_hz / fs;
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    gain = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
  }

  double Step(double x) {
    const double y = gain * x + a1 * z1 + a2 * z2;
    z2 = z1;
    z1 = y;
    return y;
  }
};

// Syllable rhythm: (onset, length) pairs filling the utterance.  The
// pattern is drawn at a nominal rate and then time-scaled by the speaker's
// rate, so a prompt seed fixes the syllable count ("same text") while the
// pace stays speaker-specific.
struct Rhythm {
  std::vector<std::pair<double, double>> syllables;
  double duration_s = 0.0;
};

inline Rhythm MakeRhythm(std::uint64_t rhythm_seed, double rate, double approx_duration_s) {
  std::mt19937_64 rng(rhythm_seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  constexpr double kNominalRate = 4.0;
  Rhythm r;
  const double period = 1.0 / kNominalRate;
  double t = uniform(0.08, 0.15);  // lead-in silence
  while (t < approx_duration_s) {
    const double on = std::min(0.28, std::max(0.12, period * uniform(0.5, 0.7)));
    const double off = std::max(0.05, period - on) * uniform(0.8, 1.2);
    r.syllables.emplace_back(t, on);
    t += on + off;
  }
  r.duration_s = t + uniform(0.05, 0.12);  // trailing silence
  const double scale = kNominalRate / rate;
  for (auto &[onset, length] : r.syllables) {
    onset *= scale;
    length *= scale;
  }
  r.duration_s *= scale;
  return r;
}

struct ChannelEffect {
  double tilt = 0.0;   // first-order difference coefficient
  double level = 0.3;  // peak amplitude
};

inline AudioBuffer RenderUtterance(const VoiceParams &voice, const Rhythm &rhythm,
                                   std::uint64_t utt_seed, int fs,
                                   const ChannelEffect &channel) {
  std::mt19937_64 rng(utt_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  AudioBuffer audio;
  audio.sample_rate_hz = fs;
  const std::size_t n = static_cast<std::size_t>(std::lround(rhythm.duration_s * fs));
  audio.samples.assign(n, 0.0);

  std::array<Resonator, 4> sections{
      Resonator(voice.formants[0], voice.bandwidths[0], fs),
      Resonator(voice.formants[1], voice.bandwidths[1], fs),
      Resonator(voice.formants[2], voice.bandwidths[2], fs),
      Resonator(voice.formants[3], voice.bandwidths[3], fs)};

  // Amplitude envelope: silence outside the phrase, a continuous voiced
  // floor inside it, Hann-shaped syllable nuclei on top.  Keeping the
  // inter-syllable level up (~6 dB below the nuclei) matches connected
  // speech and keeps the per-utterance feature variance dominated by the
  // vocal-tract shape rather than the on/off rhythm.
  constexpr double kPhraseFloor = 0.5;
  std::vector<double> envelope(n, 0.0);
  std::vector<double> f0_curve(n, voice.f0_base);
  if (!rhythm.syllables.empty()) {
    const std::size_t phrase_begin =
        static_cast<std::size_t>(std::lround(rhythm.syllables.front().first * fs));
    const std::size_t phrase_end = std::min(
        n, static_cast<std::size_t>(std::lround((rhythm.syllables.back().first +
                                                 rhythm.syllables.back().second) *
                                                fs)));
    for (std::size_t i = phrase_begin; i < phrase_end; ++i) envelope[i] = kPhraseFloor;
    for (const auto &[onset, length] : rhythm.syllables) {
      const std::size_t begin = static_cast<std::size_t>(std::lround(onset * fs));
      const std::size_t count = static_cast<std::size_t>(std::lround(length * fs));
      const double syl_jitter = 1.0 + 0.02 * (unit(rng) - 0.5);
      for (std::size_t i = 0; i < count && begin + i < n; ++i) {
        const double rel = static_cast<double>(i) / static_cast<double>(count);
        const double burst = 0.5 - 0.5 * std::cos(2.0 * kPi * rel);
        envelope[begin + i] = kPhraseFloor + (1.0 - kPhraseFloor) * burst;
        f0_curve[begin + i] =
            voice.f0_base * syl_jitter * (1.0 + 0.05 * std::sin(2.0 * kPi * rel));
      }
    }
  }

  const double f0_drift = 1.0 + 0.04 * (unit(rng) - 0.5);  // per-utterance F0 offset
  double phase = 1.0;  // emit a pulse when the phase accumulator wraps
  for (std::size_t i = 0; i < n; ++i) {
    if (envelope[i] <= 0.0) continue;
    phase += f0_curve[i] * f0_drift / fs;
    double excitation = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      excitation = 1.0;
    }
    excitation += 0.004 * gauss(rng);  // breath noise
    double s = excitation;
    for (auto &sec : sections) s = sec.Step(s);
    audio.samples[i] = envelope[i] * s;
  }

  // channel: first-order tilt then peak normalization
  if (channel.tilt != 0.0) {
    double prev = 0.0;
    for (auto &s : audio.samples) {
      const double cur = s;
      s = s - channel.tilt * prev;
      prev = cur;
    }
  }
  double peak = 1e-12;
  for (double s : audio.samples) peak = std::max(peak, std::fabs(s));
  for (auto &s : audio.samples) s *= channel.level / peak;
  return audio;
}

}  // namespace synth_detail

struct SynthResult {
  Manifest manifest;
  std::string manifest_path;
};

inline SynthResult GenerateSyntheticCorpus(const std::string &out_dir, const SynthOptions &opts) {
  namespace fs = std::filesystem;
  if (opts.num_attackers < 1 || opts.num_speakers <= opts.num_attackers + 2)
    throw DataError("synth-corpus: need at least attackers+3 speakers");
  if (opts.prompts >= opts.utterances_per_target)
    throw DataError("synth-corpus: prompts must be fewer than utterances per target");
  fs::create_directories(fs::path(out_dir) / "wav");

  const int num_targets = opts.num_speakers - opts.num_attackers;
  const int fs_hz = opts.sample_rate_hz;

  // speaker roster and voices
  struct Spk {
    SpeakerRecord record;
    synth_detail::VoiceParams voice;
  };
  std::vector<Spk> attackers, targets;
  for (int i = 0; i < opts.num_attackers; ++i) {
    Spk s;
    char id[16];
    std::snprintf(id, sizeof(id), "a%02d", i);
    s.record.speaker_id = id;
    s.record.role = Role::kAttacker;
    const bool male = (i % 2 == 0);
    s.record.gender = male ? Gender::kMale : Gender::kFemale;
    s.record.nationality = "FI";
    s.voice = synth_detail::SampleVoice(opts.seed, s.record.speaker_id, male, true);
    attackers.push_back(std::move(s));
  }
  const int native_targets =
      static_cast<int>(std::lround(opts.native_fraction * num_targets));
  for (int i = 0; i < num_targets; ++i) {
    Spk s;
    char id[16];
    std::snprintf(id, sizeof(id), "t%02d", i);
    s.record.speaker_id = id;
    s.record.role = Role::kTarget;
    const bool male = (i % 2 == 0);
    s.record.gender = male ? Gender::kMale : Gender::kFemale;
    s.record.nationality = i < native_targets ? "FI" : "XX";
    s.voice = synth_detail::SampleVoice(opts.seed, s.record.speaker_id, male);
    targets.push_back(std::move(s));
  }

  Manifest manifest;
  for (const auto &s : attackers) manifest.speakers.push_back(s.record);
  for (const auto &s : targets) manifest.speakers.push_back(s.record);

  auto prompt_name = [&](int p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%02d", p);
    return std::string(buf);
  };

  auto emit = [&](const SpeakerRecord &spk, const std::string &utt_tag, Session session,
                  const synth_detail::VoiceParams &voice, std::uint64_t rhythm_seed,
                  const std::optional<std::string> &prompt,
                  const std::optional<std::string> &partition,
                  const synth_detail::ChannelEffect &channel) {
    const std::string utt_id = spk.speaker_id + "_" + utt_tag;
    const auto rhythm = synth_detail::MakeRhythm(rhythm_seed, voice.syllable_rate, 2.5);
    const AudioBuffer audio = synth_detail::RenderUtterance(
        voice, rhythm, synth_detail::MixSeed(opts.seed, "render/" + utt_id), fs_hz, channel);
    const std::string rel = "wav/" + spk.speaker_id + "/" + utt_id + ".wav";
    fs::create_directories(fs::path(out_dir) / "wav" / spk.speaker_id);
    WriteWav16((fs::path(out_dir) / rel).string(), audio);

    UtteranceRecord u;
    u.utterance_id = utt_id;
    u.speaker_id = spk.speaker_id;
    u.audio_path = rel;
    u.session = session;
    u.duration_s = audio.DurationSeconds();
    u.sample_rate_hz = fs_hz;
    u.prompt_id = prompt;
    u.partition = partition;
    manifest.utterances.push_back(std::move(u));
  };

  // targets: wild utterances; free rhythms first, then prompt-tagged ones
  const int train_block =
      static_cast<int>(std::lround(opts.train_fraction_per_profile * num_targets));
  for (int i = 0; i < num_targets; ++i) {
    const auto &spk = targets[static_cast<std::size_t>(i)];
    std::optional<std::string> train_tag;
    if (i < train_block)
      train_tag = "train_a";
    else if (i < 2 * train_block)
      train_tag = "train_b";
    for (int u = 0; u < opts.utterances_per_target; ++u) {
      char tag[16];
      std::snprintf(tag, sizeof(tag), "w%02d", u);
      const int prompt_index = u - (opts.utterances_per_target - opts.prompts);
      std::optional<std::string> prompt;
      std::uint64_t rhythm_seed;
      if (prompt_index >= 0) {
        prompt = prompt_name(prompt_index);
        rhythm_seed = synth_detail::MixSeed(opts.seed, "prompt/" + *prompt);
      } else {
        rhythm_seed = synth_detail::MixSeed(opts.seed, "rhythm/" + spk.record.speaker_id + tag);
      }
      // held-out tail: the last two utterances are the evaluation split
      std::optional<std::string> partition =
          (u >= opts.utterances_per_target - 2) ? std::optional<std::string>("eval") : train_tag;
      std::mt19937_64 chan_rng(
          synth_detail::MixSeed(opts.seed, "chan/" + spk.record.speaker_id + tag));
      synth_detail::ChannelEffect channel;
      channel.tilt = std::uniform_real_distribution<double>(0.0, 0.08)(chan_rng);
      channel.level = std::uniform_real_distribution<double>(0.2, 0.45)(chan_rng);
      emit(spk.record, tag, Session::kWild, spk.voice, rhythm_seed, prompt, partition, channel);
    }
  }

  // attackers: natural takes, then zero-effort and mimicry per prompt
  for (const auto &atk : attackers) {
    // nearest target in parameter space is the mimic reference
    const synth_detail::VoiceParams *nearest = nullptr;
    double best = 1e300;
    for (const auto &tgt : targets) {
      const double d = atk.voice.DistanceTo(tgt.voice);
      if (d < best) {
        best = d;
        nearest = &tgt.voice;
      }
    }
    const synth_detail::VoiceParams mimic_voice =
        atk.voice.MorphToward(*nearest, opts.mimic_morph);

    synth_detail::ChannelEffect lab_channel;  // fixed recording gear, no tilt
    lab_channel.level = 0.35;
    for (int u = 0; u < opts.natural_per_attacker; ++u) {
      char tag[16];
      std::snprintf(tag, sizeof(tag), "n%02d", u);
      emit(atk.record, tag, Session::kNatural, atk.voice,
           synth_detail::MixSeed(opts.seed, "rhythm/" + atk.record.speaker_id + tag),
           std::nullopt, std::nullopt, lab_channel);
    }
    for (int p = 0; p < opts.prompts; ++p) {
      const std::string prompt = prompt_name(p);
      const std::uint64_t rhythm_seed = synth_detail::MixSeed(opts.seed, "prompt/" + prompt);
      emit(atk.record, "z" + prompt, Session::kZeroEffort, atk.voice, rhythm_seed, prompt,
           std::nullopt, lab_channel);
      emit(atk.record, "m" + prompt, Session::kMimicry, mimic_voice, rhythm_seed, prompt,
           std::nullopt, lab_channel);
    }
  }

  ValidateManifest(manifest);
  SynthResult result;
  result.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  SaveManifestCsv(manifest, result.manifest_path);
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace asvmimic
