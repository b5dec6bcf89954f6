// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "durhaz/core.hpp"
#include "durhaz/distributions.hpp"
#include "durhaz/errors.hpp"
#include "durhaz/io.hpp"
#include "durhaz/rng.hpp"

namespace durhaz {

// ---------------------------------------------------------------------------
// Phone -> phonetic class mapping. Carried as data so corpora with different
// phone sets only need a different table, not different code.
// ---------------------------------------------------------------------------

struct PhoneClassTable {
  std::map<std::string, PhoneticClass> table;

  PhoneticClass classify(const std::string& label) const {
    auto it = table.find(label);
    return it == table.end() ? PhoneticClass::Other : it->second;
  }

  std::set<std::string> silence_labels() const {
    std::set<std::string> out;
    for (const auto& [label, cls] : table) {
      if (cls == PhoneticClass::Silence) out.insert(label);
    }
    return out;
  }
};

/// Default mapping for a common English monophone set; corpora with other
/// inventories supply their own table via config.
inline PhoneClassTable default_class_table() {
  PhoneClassTable t;
  auto add = [&](PhoneticClass cls, std::initializer_list<const char*> labels) {
    for (const char* l : labels) t.table[l] = cls;
  };
  add(PhoneticClass::Vowel, {"aa", "ae", "ah", "ao", "aw", "ax", "ay", "eh", "er",
                             "ey", "ih", "iy", "ow", "oy", "uh", "uw"});
  add(PhoneticClass::Plosive, {"p", "b", "t", "d", "k", "g"});
  add(PhoneticClass::Fricative, {"f", "v", "th", "dh", "s", "z", "sh", "zh", "hh"});
  add(PhoneticClass::Nasal, {"m", "n", "ng"});
  add(PhoneticClass::Affricate, {"ch", "jh"});
  add(PhoneticClass::GlideLiquid, {"l", "r", "w", "y"});
  add(PhoneticClass::Silence, {"pau", "sil", "sp", "ssil"});
  return t;
}

// ---------------------------------------------------------------------------
// Corpus containers
// ---------------------------------------------------------------------------

struct Corpus {
  std::vector<Utterance> utterances;
  int feature_dim = 0;

  long total_phones() const {
    long n = 0;
    for (const auto& u : utterances) n += static_cast<long>(u.phones.size());
    return n;
  }
};

// ---------------------------------------------------------------------------
// Alignment file parsing. HTK-style label lines: "start end label" with times
// in 100 ns units, contiguous from 0.
// ---------------------------------------------------------------------------

inline constexpr long long kDefault100nsPerFrame = 50000;  // 5 ms shift

inline long long frame_shift_100ns(double frame_shift_ms) {
  return std::llround(frame_shift_ms * 10000.0);
}

struct AlignmentOptions {
  long long shift_100ns = kDefault100nsPerFrame;
  const PhoneClassTable* classes = nullptr;  // default table when null
};

inline Utterance parse_alignment(const std::string& content, const std::string& id,
                                 const AlignmentOptions& opts = {}) {
  static const PhoneClassTable fallback = default_class_table();
  const PhoneClassTable& classes = opts.classes ? *opts.classes : fallback;
  if (opts.shift_100ns <= 0) throw InvalidArgumentError("frame shift must be positive");

  Utterance u;
  u.id = id;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  long long prev_end = 0;
  long prev_end_frame = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto fields = split_ws(stripped);
    if (fields.size() != 3) {
      throw ParseError(id + " line " + std::to_string(line_no) +
                       ": expected 'start end label', got '" + stripped + "'");
    }
    long long start = 0, end = 0;
    try {
      start = std::stoll(fields[0]);
      end = std::stoll(fields[1]);
    } catch (const std::exception&) {
      throw ParseError(id + " line " + std::to_string(line_no) + ": bad segment times");
    }
    if (first) {
      if (start != 0) {
        throw ParseError(id + " line " + std::to_string(line_no) +
                         ": first segment must start at 0");
      }
      first = false;
    } else if (start != prev_end) {
      throw ParseError(id + " line " + std::to_string(line_no) +
                       ": segment start " + std::to_string(start) +
                       " is not contiguous with previous end " + std::to_string(prev_end));
    }
    if (end <= start) {
      throw ParseError(id + " line " + std::to_string(line_no) + ": zero-length segment");
    }
    const long end_frame = static_cast<long>(
        std::llround(static_cast<double>(end) / static_cast<double>(opts.shift_100ns)));
    const int dur = static_cast<int>(end_frame - prev_end_frame);
    if (dur < 1) {
      throw ParseError(id + " line " + std::to_string(line_no) +
                       ": segment shorter than one frame");
    }
    PhoneRecord ph;
    ph.label = fields[2];
    ph.ref_duration = dur;
    ph.phonetic_class = classes.classify(ph.label);
    u.phones.push_back(std::move(ph));
    prev_end = end;
    prev_end_frame = end_frame;
  }
  if (u.phones.empty()) throw ParseError(id + ": alignment file has no segments");
  u.total_frames = prev_end_frame;
  return u;
}

inline std::string format_alignment(const Utterance& u, long long shift_100ns) {
  std::string out;
  long long t = 0;
  for (const auto& ph : u.phones) {
    const long long end = t + static_cast<long long>(ph.ref_duration) * shift_100ns;
    out += std::to_string(t) + " " + std::to_string(end) + " " + ph.label + "\n";
    t = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature files: one row per phone, "label,v1,v2,...", same order as the
// alignment file.
// ---------------------------------------------------------------------------

inline void parse_feature_file(const std::string& content, Utterance& u) {
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  std::size_t row = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (row >= u.phones.size()) {
      throw ParseError(u.id + " features line " + std::to_string(line_no) +
                       ": more rows than phones");
    }
    const auto fields = split_char(stripped, ',');
    if (fields.size() < 2) {
      throw ParseError(u.id + " features line " + std::to_string(line_no) +
                       ": expected 'label,v1,...'");
    }
    if (trim(fields[0]) != u.phones[row].label) {
      throw ParseError(u.id + " features line " + std::to_string(line_no) +
                       ": label '" + trim(fields[0]) + "' does not match phone '" +
                       u.phones[row].label + "'");
    }
    std::vector<double> feats;
    feats.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        feats.push_back(std::stod(fields[i]));
      } catch (const std::exception&) {
        throw ParseError(u.id + " features line " + std::to_string(line_no) +
                         ": bad value '" + fields[i] + "'");
      }
    }
    if (dim < 0) {
      dim = static_cast<int>(feats.size());
    } else if (static_cast<int>(feats.size()) != dim) {
      throw ParseError(u.id + " features line " + std::to_string(line_no) +
                       ": inconsistent feature width");
    }
    u.phones[row].features = std::move(feats);
    ++row;
  }
  if (row != u.phones.size()) {
    throw ParseError(u.id + ": feature file has " + std::to_string(row) +
                     " rows for " + std::to_string(u.phones.size()) + " phones");
  }
}

inline std::string format_feature_file(const Utterance& u) {
  std::string out;
  for (const auto& ph : u.phones) {
    out += ph.label;
    for (double v : ph.features) {
      out += ',';
      out += fmt_double_exact(v);
    }
    out += '\n';
  }
  return out;
}

/// Loads all `<id>.lab` / `<id>.csv` pairs under `dir`, sorted by id.
inline Corpus load_corpus(const std::string& dir, const AlignmentOptions& opts = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir);
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".lab") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw DataError("no .lab files in corpus directory: " + dir);

  Corpus corpus;
  for (const auto& id : ids) {
    const std::string lab_path = (fs::path(dir) / (id + ".lab")).string();
    const std::string csv_path = (fs::path(dir) / (id + ".csv")).string();
    Utterance u = parse_alignment(read_text_file(lab_path), id, opts);
    parse_feature_file(read_text_file(csv_path), u);
    const int dim = static_cast<int>(u.phones[0].features.size());
    if (corpus.feature_dim == 0) {
      corpus.feature_dim = dim;
    } else if (corpus.feature_dim != dim) {
      throw DataError(id + ": feature width " + std::to_string(dim) +
                      " differs from corpus width " + std::to_string(corpus.feature_dim));
    }
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Frame expansion
// ---------------------------------------------------------------------------

/// Linear encoding of the within-phone frame counter appended to augmented
/// inputs: n / divisor clamped to the feature range.
struct CounterEncoding {
  double divisor = 100.0;
  double lo = 0.01;
  double hi = 0.99;

  double encode(int n) const {
    return std::clamp(static_cast<double>(n) / divisor, lo, hi);
  }
};

/// Expands an utterance into per-frame rows with phone-final indicator
/// targets. Augmented rows carry the encoded counter as their last element;
/// unaugmented rows are the phone's features verbatim, constant within a
/// phone.
inline FrameDataset expand_to_frames(const Utterance& u, bool augmented,
                                     const CounterEncoding& enc = {}) {
  FrameDataset fd;
  fd.augmented = augmented;
  fd.inputs.reserve(static_cast<std::size_t>(u.total_frames));
  fd.targets.reserve(static_cast<std::size_t>(u.total_frames));
  for (std::size_t p = 0; p < u.phones.size(); ++p) {
    const PhoneRecord& ph = u.phones[p];
    for (int n = 1; n <= ph.ref_duration; ++n) {
      std::vector<double> row = ph.features;
      if (augmented) row.push_back(enc.encode(n));
      fd.inputs.push_back(std::move(row));
      fd.targets.push_back(n == ph.ref_duration ? 1.0 : 0.0);
      fd.phone_index.push_back(static_cast<int>(p));
      fd.counter.push_back(n);
    }
  }
  return fd;
}

/// Recovers per-phone durations from the indicator targets; inverse of
/// expand_to_frames on the duration side.
inline std::vector<int> durations_from_targets(const FrameDataset& fd) {
  std::vector<int> durations;
  int run = 0;
  for (double t : fd.targets) {
    ++run;
    if (t == 1.0) {
      durations.push_back(run);
      run = 0;
    }
  }
  if (run != 0) throw InvalidArgumentError("frame targets do not end a phone");
  return durations;
}

// ---------------------------------------------------------------------------
// Feature normalisation to [0.01, 0.99], statistics from the training
// portion only.
// ---------------------------------------------------------------------------

struct NormalisationRecord {
  std::vector<double> mins, maxs;
  std::vector<bool> constant;
  double lo = 0.01;
  double hi = 0.99;

  int dim() const { return static_cast<int>(mins.size()); }

  double apply_value(double v, std::size_t d, bool* clamped) const {
    if (constant[d]) return 0.5;
    double out = lo + (v - mins[d]) * (hi - lo) / (maxs[d] - mins[d]);
    if (out < lo || out > hi) {
      // rounding right at the edge is not a clamp worth reporting
      if (clamped && (out < lo - 1e-12 || out > hi + 1e-12)) *clamped = true;
      out = std::clamp(out, lo, hi);
    }
    return out;
  }
};

struct ClampReport {
  std::size_t clamped_values = 0;
  std::size_t total_values = 0;
};

inline NormalisationRecord fit_normalisation(const Corpus& corpus) {
  if (corpus.utterances.empty()) {
    throw InvalidArgumentError("fit_normalisation: empty corpus");
  }
  const int dim = corpus.feature_dim;
  NormalisationRecord rec;
  rec.mins.assign(dim, std::numeric_limits<double>::infinity());
  rec.maxs.assign(dim, -std::numeric_limits<double>::infinity());
  for (const auto& u : corpus.utterances) {
    for (const auto& ph : u.phones) {
      for (int d = 0; d < dim; ++d) {
        rec.mins[d] = std::min(rec.mins[d], ph.features[d]);
        rec.maxs[d] = std::max(rec.maxs[d], ph.features[d]);
      }
    }
  }
  rec.constant.resize(dim);
  for (int d = 0; d < dim; ++d) {
    rec.constant[d] = (rec.maxs[d] - rec.mins[d]) < 1e-12;
  }
  return rec;
}

/// Applies a fitted record in place. Out-of-range values (possible on dev and
/// test data) are clamped and counted.
inline ClampReport apply_normalisation(Corpus& corpus, const NormalisationRecord& rec) {
  if (corpus.feature_dim != rec.dim()) {
    throw InvalidArgumentError("normalisation record dimension mismatch");
  }
  ClampReport report;
  for (auto& u : corpus.utterances) {
    for (auto& ph : u.phones) {
      for (std::size_t d = 0; d < ph.features.size(); ++d) {
        bool clamped = false;
        ph.features[d] = rec.apply_value(ph.features[d], d, &clamped);
        if (clamped) ++report.clamped_values;
        ++report.total_values;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Train/dev splitting: utterance-level, deterministic in the seed, partition
// order stable with respect to the input.
// ---------------------------------------------------------------------------

inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double dev_fraction,
                                              std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw InvalidArgumentError("dev_fraction must lie in (0, 1)");
  }
  const std::size_t n = corpus.utterances.size();
  if (n < 2) throw InvalidArgumentError("split_corpus needs at least 2 utterances");
  std::size_t dev_n = static_cast<std::size_t>(
      std::llround(dev_fraction * static_cast<double>(n)));
  dev_n = std::clamp<std::size_t>(dev_n, 1, n - 1);

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {  // Fisher-Yates
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::size_t> dev_idx(idx.begin(), idx.begin() + static_cast<long>(dev_n));
  std::sort(dev_idx.begin(), dev_idx.end());
  std::set<std::size_t> dev_set(dev_idx.begin(), dev_idx.end());

  Corpus train, dev;
  train.feature_dim = dev.feature_dim = corpus.feature_dim;
  for (std::size_t i = 0; i < n; ++i) {
    (dev_set.count(i) ? dev : train).utterances.push_back(corpus.utterances[i]);
  }
  return {std::move(train), std::move(dev)};
}

// ---------------------------------------------------------------------------
// Synthetic corpora with known ground-truth duration distributions.
// ---------------------------------------------------------------------------

struct PhoneSpec {
  std::string label;
  PhoneticClass phonetic_class = PhoneticClass::Other;
  DurationSpec duration;
};

struct CorpusSpec {
  std::vector<PhoneSpec> inventory;
  int utterance_count = 100;
  int phones_min = 5;
  int phones_max = 15;
  int cap = kDefaultCap;
  std::uint64_t seed = 1;
};

struct GroundTruthRow {
  std::string label;
  DurationDistribution pmf;  // truncated at spec.cap
  int median = 0;
  double mean = 0.0;  // cap-truncated mean
};

struct SynthCorpus {
  Corpus corpus;  // raw (unnormalised) features
  std::vector<GroundTruthRow> truth;
};

/// Desk-scale linguistic features standing in for a full front end: one-hot
/// current phone, one-hot left/right phone (with an utterance-boundary slot),
/// and position-in-utterance fraction. Raw values; normalisation happens at
/// training time.
inline void build_desk_features(Corpus& corpus, const std::vector<std::string>& labels) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    index[labels[i]] = static_cast<int>(i);
  }
  const int k = static_cast<int>(labels.size());
  const int dim = k + 2 * (k + 1) + 1;
  for (auto& u : corpus.utterances) {
    const int P = static_cast<int>(u.phones.size());
    for (int p = 0; p < P; ++p) {
      std::vector<double> f(dim, 0.0);
      auto idx_of = [&](int q) {
        if (q < 0 || q >= P) return k;  // boundary slot
        auto it = index.find(u.phones[q].label);
        if (it == index.end()) {
          throw DataError("phone label '" + u.phones[q].label + "' not in inventory");
        }
        return it->second;
      };
      f[idx_of(p)] = 1.0;                       // current (always in inventory)
      f[k + idx_of(p - 1)] = 1.0;               // left context
      f[k + (k + 1) + idx_of(p + 1)] = 1.0;     // right context
      f[dim - 1] = (p + 0.5) / P;               // position fraction
      u.phones[p].features = std::move(f);
    }
  }
  corpus.feature_dim = dim;
}

inline void validate_corpus_spec(const CorpusSpec& spec) {
  if (spec.inventory.empty()) throw InvalidArgumentError("corpus spec: empty inventory");
  if (spec.utterance_count < 1) {
    throw InvalidArgumentError("corpus spec: utterance_count must be >= 1");
  }
  if (spec.phones_min < 1 || spec.phones_max < spec.phones_min) {
    throw InvalidArgumentError("corpus spec: bad phones per utterance range");
  }
  if (spec.cap < 1) throw InvalidArgumentError("corpus spec: cap must be >= 1");
  std::set<std::string> seen;
  for (const auto& ph : spec.inventory) {
    if (!seen.insert(ph.label).second) {
      throw InvalidArgumentError("corpus spec: duplicate phone label '" + ph.label + "'");
    }
    validate_duration_spec(ph.duration);
    spec_pmf_capped(ph.duration, spec.cap);  // throws when no mass on [1, cap]
  }
}

inline SynthCorpus synth_corpus(const CorpusSpec& spec) {
  validate_corpus_spec(spec);
  SynthCorpus out;
  Rng rng(spec.seed);
  const int n_inv = static_cast<int>(spec.inventory.size());
  for (int ui = 0; ui < spec.utterance_count; ++ui) {
    Utterance u;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "utt_%04d", ui + 1);
    u.id = idbuf;
    const int n_phones =
        static_cast<int>(rng.uniform_int(spec.phones_min, spec.phones_max));
    long total = 0;
    for (int p = 0; p < n_phones; ++p) {
      const auto& inv = spec.inventory[rng.uniform_int(0, n_inv - 1)];
      PhoneRecord ph;
      ph.label = inv.label;
      ph.phonetic_class = inv.phonetic_class;
      ph.ref_duration = sample_duration(inv.duration, rng);
      total += ph.ref_duration;
      u.phones.push_back(std::move(ph));
    }
    u.total_frames = total;
    out.corpus.utterances.push_back(std::move(u));
  }

  std::vector<std::string> labels;
  for (const auto& ph : spec.inventory) labels.push_back(ph.label);
  std::sort(labels.begin(), labels.end());
  build_desk_features(out.corpus, labels);

  for (const auto& ph : spec.inventory) {
    GroundTruthRow row;
    row.label = ph.label;
    row.pmf = spec_pmf_capped(ph.duration, spec.cap);
    row.median = true_median(ph.duration);
    row.mean = 0.0;
    for (const auto& [d, m] : row.pmf.pmf) row.mean += static_cast<double>(d) * m;
    out.truth.push_back(std::move(row));
  }
  return out;
}

/// Ground-truth table CSV: per-(label, d) PMF rows plus median/mean summary
/// rows per label.
inline std::string format_ground_truth(const std::vector<GroundTruthRow>& truth) {
  std::string out = "label,d,pmf\n";
  for (const auto& row : truth) {
    for (const auto& [d, m] : row.pmf.pmf) {
      out += row.label + "," + std::to_string(d) + "," + fmt_double_exact(m) + "\n";
    }
    out += row.label + ",median," + std::to_string(row.median) + "\n";
    out += row.label + ",mean," + fmt_double_exact(row.mean) + "\n";
  }
  return out;
}

}  // namespace durhaz
