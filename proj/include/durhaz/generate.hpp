// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <string>
#include <vector>

#include "durhaz/hazard.hpp"
#include "durhaz/train.hpp"

namespace durhaz {

// Duration generation. Phone baselines emit one denormalised (effectively
// mean) prediction per phone. Frame systems run a single left-to-right pass:
// each frame's predicted transition probability multiplies into the remaining
// survival mass, and the phone advances at the first frame where that mass
// drops to 1-q or below (q = 0.5 gives median-based generation). Recurrent
// state flows continuously across generated boundaries; silence phones can
// take their reference durations (oracle pausing) while still driving the
// state.

struct GenOptions {
  double quantile = 0.5;
  int cap = kDefaultCap;  // per-phone frame budget; reaching it sets the flag
  bool oracle_silence = true;
};

struct PhoneDuration {
  int frames = 0;
  bool truncated = false;

  bool operator==(const PhoneDuration&) const = default;
};

struct HazardDumpRow {
  int frame = 0;  // 1-based global frame index within the utterance
  int phone = 0;
  double pi = 0.0;
  double rem_mass = 0.0;
};

inline void check_gen_options(const GenOptions& opts) {
  if (!(opts.quantile > 0.0 && opts.quantile < 1.0)) {
    throw InvalidArgumentError("quantile must lie in (0, 1)");
  }
  if (opts.cap < 1) throw InvalidArgumentError("cap must be >= 1");
}

/// Generation against an arbitrary hazard source `fn(phone_index, n)`; used
/// with exact hazards from known distributions to test the stopping rule
/// end to end without a network in the loop.
template <typename HazardFn>
inline std::vector<PhoneDuration> generate_with_hazard_source(HazardFn&& fn, int n_phones,
                                                              double q, int cap) {
  std::vector<PhoneDuration> out;
  out.reserve(static_cast<std::size_t>(n_phones));
  for (int p = 0; p < n_phones; ++p) {
    double rem = 1.0;
    const auto res = quantile_from_survival_stream(
        [&](int n) {
          rem *= (1.0 - clamp_hazard(fn(p, n)));
          return rem;
        },
        q, cap);
    out.push_back({res.duration, res.truncated});
  }
  return out;
}

/// Mean-based generation for the phone baselines: denormalised prediction,
/// rounded half-up, floored at 1. For the LSTM baseline the phone sequence
/// threads through the recurrent state in order.
inline std::vector<int> generate_phone_durations(const TrainedModel& model,
                                                 const Utterance& u,
                                                 const GenOptions& opts = {}) {
  if (!is_phone_system(model.kind)) {
    throw InvalidModelError("generate_phone_durations needs a phone baseline model");
  }
  check_gen_options(opts);
  Network net = model.network;  // private clone, fresh state
  net.reset_state();
  std::vector<int> out;
  out.reserve(u.phones.size());
  for (const auto& ph : u.phones) {
    const double raw = net.step(ph.features);
    const double denorm = raw * model.dur_std + model.dur_mean;
    const int rounded = std::max(1, static_cast<int>(std::floor(denorm + 0.5)));
    if (opts.oracle_silence && ph.phonetic_class == PhoneticClass::Silence) {
      out.push_back(ph.ref_duration);
    } else {
      out.push_back(rounded);
    }
  }
  return out;
}

namespace detail {

/// Shared per-phone generation step used by batch and incremental paths:
/// identical arithmetic, so their outputs agree frame for frame.
class FrameGenerator {
 public:
  FrameGenerator(const TrainedModel& model, const GenOptions& opts)
      : net_(model.network),
        counter_(model.counter),
        use_counter_(uses_counter_input(model.kind)),
        opts_(opts) {
    if (!is_frame_system(model.kind)) {
      throw InvalidModelError("frame-level generation needs a frame-system model");
    }
    check_gen_options(opts);
    net_.reset_state();
  }

  PhoneDuration run_phone(const PhoneRecord& ph, int phone_index,
                          std::vector<HazardDumpRow>* dump) {
    if (opts_.oracle_silence && ph.phonetic_class == PhoneticClass::Silence) {
      // oracle pausing: reference duration, but the frames still advance the
      // recurrent state
      for (int n = 1; n <= ph.ref_duration; ++n) {
        (void)net_.step(make_row(ph, n));
        ++frame_no_;
      }
      return {ph.ref_duration, false};
    }
    double rem = 1.0;
    const auto res = quantile_from_survival_stream(
        [&](int n) {
          const double pi = clamp_hazard(net_.step(make_row(ph, n)));
          rem *= (1.0 - pi);
          ++frame_no_;
          if (dump) dump->push_back({frame_no_, phone_index, pi, rem});
          return rem;
        },
        opts_.quantile, opts_.cap);
    return {res.duration, res.truncated};
  }

  void reset() {
    net_.reset_state();
    frame_no_ = 0;
  }

 private:
  std::span<const double> make_row(const PhoneRecord& ph, int n) {
    row_.assign(ph.features.begin(), ph.features.end());
    if (use_counter_) row_.push_back(counter_.encode(n));
    return row_;
  }

  Network net_;
  CounterEncoding counter_;
  bool use_counter_;
  GenOptions opts_;
  int frame_no_ = 0;
  std::vector<double> row_;
};

}  // namespace detail

/// Single-pass frame-level generation over a whole utterance. The counter fed
/// to external-memory models is the generated-so-far counter, never a
/// reference duration. The optional dump records (frame, phone, pi, rem_mass)
/// for every generated frame.
inline std::vector<PhoneDuration> generate_frame_durations(
    const TrainedModel& model, const Utterance& u, const GenOptions& opts = {},
    std::vector<HazardDumpRow>* dump = nullptr) {
  detail::FrameGenerator gen(model, opts);
  std::vector<PhoneDuration> out;
  out.reserve(u.phones.size());
  for (std::size_t p = 0; p < u.phones.size(); ++p) {
    out.push_back(gen.run_phone(u.phones[p], static_cast<int>(p), dump));
  }
  return out;
}

/// Stateful no-look-ahead generation: one phone in, that phone's duration
/// out, before the next phone is seen. Emissions are identical to
/// generate_frame_durations over the same phone sequence. State persists
/// across feeds until reset().
class IncrementalSession {
 public:
  IncrementalSession(const TrainedModel& model, const GenOptions& opts = {})
      : gen_(model, opts) {}

  PhoneDuration feed(const PhoneRecord& phone) {
    return gen_.run_phone(phone, phone_index_++, nullptr);
  }

  void reset() {
    gen_.reset();
    phone_index_ = 0;
  }

 private:
  detail::FrameGenerator gen_;
  int phone_index_ = 0;
};

// ---------------------------------------------------------------------------
// Duration CSV: one row per phone, "utterance,phone,label,duration,truncated".
// ---------------------------------------------------------------------------

struct DurationRow {
  std::string utterance;
  int phone = 0;
  std::string label;
  int duration = 0;
  bool truncated = false;
};

inline std::string format_durations_csv(const std::vector<DurationRow>& rows) {
  std::string out = "utterance,phone,label,duration,truncated\n";
  for (const auto& r : rows) {
    out += r.utterance + "," + std::to_string(r.phone) + "," + r.label + "," +
           std::to_string(r.duration) + "," + (r.truncated ? "1" : "0") + "\n";
  }
  return out;
}

inline std::vector<DurationRow> parse_durations_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  std::vector<DurationRow> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (line_no == 1) {
      if (stripped != "utterance,phone,label,duration,truncated") {
        throw ParseError("durations CSV: unexpected header '" + stripped + "'");
      }
      continue;
    }
    const auto f = split_char(stripped, ',');
    if (f.size() != 5) {
      throw ParseError("durations CSV line " + std::to_string(line_no) +
                       ": expected 5 fields");
    }
    DurationRow r;
    r.utterance = f[0];
    try {
      r.phone = std::stoi(f[1]);
      r.label = f[2];
      r.duration = std::stoi(f[3]);
      r.truncated = std::stoi(f[4]) != 0;
    } catch (const std::exception&) {
      throw ParseError("durations CSV line " + std::to_string(line_no) + ": bad value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string format_hazard_dump_csv(const std::string& utterance_id,
                                          const std::vector<HazardDumpRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += utterance_id + "," + std::to_string(r.frame) + "," + std::to_string(r.phone) +
           "," + fmt_double_exact(r.pi) + "," + fmt_double_exact(r.rem_mass) + "\n";
  }
  return out;
}

inline constexpr const char* kHazardDumpHeader = "utterance,frame,phone,pi,rem_mass\n";

}  // namespace durhaz
