// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace durhaz {

// Floor applied to every transition probability. A per-frame hazard of at
// least this value drives the survival product to zero over any infinite
// extension, so a finite predictor always terminates.
inline constexpr double kHazardFloor = 1e-6;

// Default truncation horizon for duration distributions and generation:
// 300 frames is 1.5 s at a 5 ms shift, far beyond observed phone durations.
inline constexpr int kDefaultCap = 300;

/// Phonetic class of a phone, used for per-class metric breakdowns and for
/// excluding silence from evaluation. Assigned from a configurable table at
/// ingestion, never inferred from label spelling downstream.
enum class PhoneticClass : std::uint8_t {
  Vowel,
  Plosive,
  Fricative,
  Nasal,
  Affricate,
  GlideLiquid,
  Silence,
  Other,
};

inline const char* to_string(PhoneticClass c) {
  switch (c) {
    case PhoneticClass::Vowel: return "vowel";
    case PhoneticClass::Plosive: return "plosive";
    case PhoneticClass::Fricative: return "fricative";
    case PhoneticClass::Nasal: return "nasal";
    case PhoneticClass::Affricate: return "affricate";
    case PhoneticClass::GlideLiquid: return "glide_liquid";
    case PhoneticClass::Silence: return "silence";
    case PhoneticClass::Other: return "other";
  }
  return "other";
}

inline std::optional<PhoneticClass> phonetic_class_from_string(const std::string& s) {
  if (s == "vowel") return PhoneticClass::Vowel;
  if (s == "plosive") return PhoneticClass::Plosive;
  if (s == "fricative") return PhoneticClass::Fricative;
  if (s == "nasal") return PhoneticClass::Nasal;
  if (s == "affricate") return PhoneticClass::Affricate;
  if (s == "glide_liquid" || s == "glide" || s == "liquid") return PhoneticClass::GlideLiquid;
  if (s == "silence") return PhoneticClass::Silence;
  if (s == "other") return PhoneticClass::Other;
  return std::nullopt;
}

/// One phone: its label, linguistic feature vector, phonetic class, and
/// reference duration in frames.
struct PhoneRecord {
  std::string label;
  std::vector<double> features;
  PhoneticClass phonetic_class = PhoneticClass::Other;
  int ref_duration = 1;  // frames, >= 1
};

/// An ordered phone sequence with its total frame count.
struct Utterance {
  std::string id;
  std::vector<PhoneRecord> phones;
  long total_frames = 0;
};

/// Frame-expanded view of an utterance: one input row per frame (the phone's
/// features, optionally extended with an encoded within-phone counter), a
/// binary phone-final indicator per frame, and bookkeeping to map frames back
/// to phones.
struct FrameDataset {
  std::vector<std::vector<double>> inputs;  // T rows
  std::vector<double> targets;              // T values in {0, 1}
  std::vector<int> phone_index;             // frame -> phone
  std::vector<int> counter;                 // raw within-phone frame number, 1-based
  bool augmented = false;
};

/// Per-frame transition probabilities for one phone, with the running
/// survival mass P(D > n) alongside.
struct HazardSequence {
  std::vector<double> probs;     // each in [kHazardFloor, 1]
  std::vector<double> survival;  // survival[n-1] = prod_{k<=n} (1 - probs[k-1])
};

/// Explicit PMF on {1, ..., cap}. Mass beyond the cap is absorbed into the
/// cap entry so the PMF always sums to one.
struct DurationDistribution {
  std::map<int, double> pmf;
  int cap = kDefaultCap;
};

// ---------------------------------------------------------------------------
// Validation. Returns findings rather than aborting so ingestion pipelines
// can report every problem in one pass.
// ---------------------------------------------------------------------------

struct ValidateOptions {
  // Feature-range checks only make sense after normalisation.
  bool check_feature_range = true;
  double feature_lo = 0.01;
  double feature_hi = 0.99;
  // When set, checks that phonetic_class == Silence exactly for labels in
  // this set.
  const std::set<std::string>* silence_labels = nullptr;
};

inline std::vector<std::string> validate_utterance(const Utterance& u,
                                                   const ValidateOptions& opts = {}) {
  std::vector<std::string> findings;
  if (u.phones.empty()) {
    findings.push_back("utterance " + u.id + ": has no phones (P >= 1 required)");
    return findings;
  }
  long dur_sum = 0;
  for (std::size_t p = 0; p < u.phones.size(); ++p) {
    const PhoneRecord& ph = u.phones[p];
    const std::string where = "utterance " + u.id + " phone " + std::to_string(p) +
                              " ('" + ph.label + "')";
    if (ph.ref_duration < 1) {
      findings.push_back(where + ": ref_duration must be >= 1, got " +
                         std::to_string(ph.ref_duration));
    }
    dur_sum += ph.ref_duration;
    if (opts.check_feature_range) {
      for (std::size_t d = 0; d < ph.features.size(); ++d) {
        const double v = ph.features[d];
        if (v < opts.feature_lo || v > opts.feature_hi) {
          findings.push_back(where + ": feature " + std::to_string(d) +
                             " outside normalisation range [" +
                             std::to_string(opts.feature_lo) + ", " +
                             std::to_string(opts.feature_hi) + "]");
          break;  // one finding per phone is enough
        }
      }
    }
    if (opts.silence_labels != nullptr) {
      const bool in_set = opts.silence_labels->count(ph.label) > 0;
      const bool is_sil = ph.phonetic_class == PhoneticClass::Silence;
      if (in_set != is_sil) {
        findings.push_back(where + ": silence class/label mismatch");
      }
    }
  }
  if (dur_sum != u.total_frames) {
    findings.push_back("utterance " + u.id + ": total_frames (" +
                       std::to_string(u.total_frames) +
                       ") != sum of phone durations (" + std::to_string(dur_sum) + ")");
  }
  return findings;
}

}  // namespace durhaz
