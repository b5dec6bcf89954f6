// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "durhaz/datasets.hpp"
#include "durhaz/nnet.hpp"

namespace durhaz {

// The four systems: two phone-level mean-predicting baselines (MSE on
// z-scored durations) and two frame-level hazard predictors (MSE on 0/1
// phone-final indicators). The external-memory variant appends the encoded
// within-phone counter to every frame input; the internal variant sees
// identical inputs for all frames of a phone and must track progress in its
// recurrent state.

enum class SystemKind : std::uint8_t {
  PhoneDNN = 0,
  PhoneLSTM = 1,
  FrameLSTMInternal = 2,
  FrameLSTMExternal = 3,
};

inline bool is_phone_system(SystemKind k) {
  return k == SystemKind::PhoneDNN || k == SystemKind::PhoneLSTM;
}
inline bool is_frame_system(SystemKind k) { return !is_phone_system(k); }
inline bool uses_counter_input(SystemKind k) { return k == SystemKind::FrameLSTMExternal; }
inline bool has_recurrent_layer(SystemKind k) { return k != SystemKind::PhoneDNN; }

inline const char* to_string(SystemKind k) {
  switch (k) {
    case SystemKind::PhoneDNN: return "phone-dnn";
    case SystemKind::PhoneLSTM: return "phone-lstm";
    case SystemKind::FrameLSTMInternal: return "frame-lstm-i";
    case SystemKind::FrameLSTMExternal: return "frame-lstm-e";
  }
  return "?";
}

inline std::optional<SystemKind> system_kind_from_string(const std::string& s) {
  if (s == "phone-dnn") return SystemKind::PhoneDNN;
  if (s == "phone-lstm") return SystemKind::PhoneLSTM;
  if (s == "frame-lstm-i") return SystemKind::FrameLSTMInternal;
  if (s == "frame-lstm-e") return SystemKind::FrameLSTMExternal;
  return std::nullopt;
}

/// Hidden-layer sizing. Desk-scale defaults; the full-size configurations
/// from larger systems are reachable through config.
struct NetArch {
  std::vector<int> dense_widths;
  int recurrent_width = 32;
};

inline NetArch default_arch(SystemKind kind) {
  NetArch arch;
  if (kind == SystemKind::PhoneDNN) {
    arch.dense_widths = {64, 64, 64};
  } else {
    arch.dense_widths = {64, 64};
    arch.recurrent_width = 32;
  }
  return arch;
}

inline std::vector<LayerSpec> layer_specs_for(SystemKind kind, const NetArch& arch) {
  std::vector<LayerSpec> specs;
  for (int w : arch.dense_widths) specs.push_back({LayerKind::DenseTanh, w});
  if (has_recurrent_layer(kind)) specs.push_back({LayerKind::Recurrent, arch.recurrent_width});
  specs.push_back({is_frame_system(kind) ? LayerKind::DenseSigmoid : LayerKind::DenseLinear, 1});
  return specs;
}

struct EpochStats {
  double train_loss = 0.0;  // mean squared error per target
  double dev_loss = 0.0;
};

struct TrainedModel {
  SystemKind kind = SystemKind::PhoneDNN;
  Network network;
  NormalisationRecord normalisation;
  CounterEncoding counter;
  double dur_mean = 0.0;  // phone systems: z-score statistics from training data
  double dur_std = 1.0;
  std::vector<EpochStats> history;
  int best_epoch = -1;  // 0-based index of the retained weights
};

// ---------------------------------------------------------------------------
// Early stopping: abort once the dev objective has failed to improve for
// `patience` epochs; the retained weights are always the dev-loss argmin
// (earliest epoch on ties).
// ---------------------------------------------------------------------------

struct EarlyStopDecision {
  bool stop = false;
  int best_epoch = 0;  // 0-based
};

inline EarlyStopDecision early_stop_controller(const std::vector<double>& dev_losses,
                                               int patience) {
  if (dev_losses.empty()) throw InvalidArgumentError("early stop: empty history");
  int best = 0;
  for (int i = 1; i < static_cast<int>(dev_losses.size()); ++i) {
    if (dev_losses[i] < dev_losses[best]) best = i;
  }
  const int since_best = static_cast<int>(dev_losses.size()) - 1 - best;
  return {since_best >= patience, best};
}

// ---------------------------------------------------------------------------
// Example construction
// ---------------------------------------------------------------------------

struct SequenceExample {
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::string id;
};

struct DurationStats {
  double mean = 0.0;
  double stddev = 1.0;
};

inline DurationStats duration_stats(const Corpus& corpus) {
  double sum = 0.0;
  long n = 0;
  for (const auto& u : corpus.utterances) {
    for (const auto& ph : u.phones) {
      sum += ph.ref_duration;
      ++n;
    }
  }
  if (n == 0) throw InvalidArgumentError("duration_stats: corpus has no phones");
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& u : corpus.utterances) {
    for (const auto& ph : u.phones) {
      const double d = ph.ref_duration - mean;
      sq += d * d;
    }
  }
  double stddev = std::sqrt(sq / static_cast<double>(n));
  if (stddev < 1e-12) stddev = 1.0;  // constant-duration corpora
  return {mean, stddev};
}

inline std::vector<SequenceExample> phone_examples(const Corpus& corpus,
                                                   const DurationStats& stats) {
  std::vector<SequenceExample> out;
  out.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) {
    SequenceExample ex;
    ex.id = u.id;
    for (const auto& ph : u.phones) {
      ex.rows.push_back(ph.features);
      ex.targets.push_back((ph.ref_duration - stats.mean) / stats.stddev);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<SequenceExample> frame_examples(const Corpus& corpus, bool augmented,
                                                   const CounterEncoding& enc) {
  std::vector<SequenceExample> out;
  out.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) {
    FrameDataset fd = expand_to_frames(u, augmented, enc);
    SequenceExample ex;
    ex.id = u.id;
    ex.rows = std::move(fd.inputs);
    ex.targets = std::move(fd.targets);
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Core loop: sequence-level SGD (one update per utterance), per-epoch
// shuffling derived from the master seed, early stopping on dev MSE.
// ---------------------------------------------------------------------------

namespace detail {

inline double mean_loss(const Network& net, const std::vector<SequenceExample>& examples) {
  double loss = 0.0;
  long targets = 0;
  for (const auto& ex : examples) {
    loss += sequence_loss(net, ex.rows, ex.targets);
    targets += static_cast<long>(ex.targets.size());
  }
  return targets == 0 ? 0.0 : loss / static_cast<double>(targets);
}

inline TrainedModel run_training_loop(SystemKind kind, const std::vector<LayerSpec>& specs,
                                      int input_width,
                                      const std::vector<SequenceExample>& train,
                                      const std::vector<SequenceExample>& dev,
                                      const TrainConfig& cfg) {
  check_train_config(cfg);
  if (train.empty() || dev.empty()) {
    throw InvalidArgumentError("training needs non-empty train and dev sets");
  }
  TrainedModel model;
  model.kind = kind;
  model.network = init_network(specs, input_width, cfg.seed, cfg.init_scale);

  long train_targets = 0;
  for (const auto& ex : train) train_targets += static_cast<long>(ex.targets.size());

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> best_params;
  std::vector<double> dev_losses;
  std::vector<double> grads;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const auto& ex = train[idx];
      const double loss = backward_sequence(model.network, ex.rows, ex.targets, grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch + 1) + ", utterance " + ex.id);
      }
      if (cfg.clip_norm > 0.0) clip_gradient_norm(grads, cfg.clip_norm);
      sgd_step(model.network, grads, cfg.learning_rate);
      epoch_loss += loss;
    }

    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(train_targets);
    stats.dev_loss = mean_loss(model.network, dev);
    if (!std::isfinite(stats.dev_loss)) {
      throw NumericalError("training diverged (non-finite dev loss) at epoch " +
                           std::to_string(epoch + 1));
    }
    model.history.push_back(stats);
    dev_losses.push_back(stats.dev_loss);

    const auto decision = early_stop_controller(dev_losses, cfg.patience);
    if (decision.best_epoch == epoch) {
      best_params = model.network.flatten_parameters();
    }
    model.best_epoch = decision.best_epoch;
    if (decision.stop) break;
  }
  model.network.set_parameters(best_params);
  model.network.reset_state();
  return model;
}

}  // namespace detail

/// Trains a mean-predicting phone-level baseline: inputs are per-phone
/// feature vectors (a sequence per utterance for the LSTM variant), targets
/// are z-scored durations with statistics from the training phones.
inline TrainedModel train_phone_system(SystemKind kind, const Corpus& train,
                                       const Corpus& dev, const NormalisationRecord& norm,
                                       const TrainConfig& cfg, const NetArch& arch) {
  if (!is_phone_system(kind)) {
    throw InvalidModelError("train_phone_system: kind must be a phone baseline");
  }
  const DurationStats stats = duration_stats(train);
  auto model = detail::run_training_loop(kind, layer_specs_for(kind, arch),
                                         train.feature_dim, phone_examples(train, stats),
                                         phone_examples(dev, stats), cfg);
  model.normalisation = norm;
  model.dur_mean = stats.mean;
  model.dur_std = stats.stddev;
  return model;
}

inline TrainedModel train_phone_system(SystemKind kind, const Corpus& train,
                                       const Corpus& dev, const NormalisationRecord& norm,
                                       const TrainConfig& cfg) {
  return train_phone_system(kind, train, dev, norm, cfg, default_arch(kind));
}

/// Trains a frame-level hazard system on phone-final indicators. Recurrent
/// state runs across phone boundaries within an utterance and is reset
/// between utterances.
inline TrainedModel train_frame_system(SystemKind kind, const Corpus& train,
                                       const Corpus& dev, const NormalisationRecord& norm,
                                       const TrainConfig& cfg, const NetArch& arch,
                                       const CounterEncoding& enc = {}) {
  if (!is_frame_system(kind)) {
    throw InvalidModelError("train_frame_system: kind must be a frame system");
  }
  const bool augmented = uses_counter_input(kind);
  const int input_width = train.feature_dim + (augmented ? 1 : 0);
  auto model = detail::run_training_loop(kind, layer_specs_for(kind, arch), input_width,
                                         frame_examples(train, augmented, enc),
                                         frame_examples(dev, augmented, enc), cfg);
  model.normalisation = norm;
  model.counter = enc;
  return model;
}

inline TrainedModel train_frame_system(SystemKind kind, const Corpus& train,
                                       const Corpus& dev, const NormalisationRecord& norm,
                                       const TrainConfig& cfg) {
  return train_frame_system(kind, train, dev, norm, cfg, default_arch(kind));
}

/// Split + normalise in the right order: statistics come from the training
/// portion only, then both portions are mapped (dev values may clamp).
struct PreparedData {
  Corpus train, dev;
  NormalisationRecord norm;
  ClampReport dev_clamps;
};

inline PreparedData prepare_training_data(const Corpus& raw, double dev_fraction,
                                          std::uint64_t split_seed) {
  PreparedData out;
  auto [train, dev] = split_corpus(raw, dev_fraction, split_seed);
  out.norm = fit_normalisation(train);
  out.train = std::move(train);
  out.dev = std::move(dev);
  apply_normalisation(out.train, out.norm);
  out.dev_clamps = apply_normalisation(out.dev, out.norm);
  return out;
}

// ---------------------------------------------------------------------------
// Model file: "DHMD" | u32 version | u8 kind | counter (divisor, lo, hi)
// | normalisation (u32 dim, lo, hi, then per-dim min/max/constant)
// | dur_mean | dur_std | history (u32 n, per-epoch train/dev losses)
// | u32 best_epoch | embedded network blob (its own header, see nnet).
// All floats little-endian f64.
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[4] = {'D', 'H', 'M', 'D'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const TrainedModel& model, std::ostream& os) {
  os.write(kModelMagic, 4);
  write_u32(os, kModelVersion);
  write_u8(os, static_cast<std::uint8_t>(model.kind));
  write_f64(os, model.counter.divisor);
  write_f64(os, model.counter.lo);
  write_f64(os, model.counter.hi);
  write_u32(os, static_cast<std::uint32_t>(model.normalisation.dim()));
  write_f64(os, model.normalisation.lo);
  write_f64(os, model.normalisation.hi);
  for (int d = 0; d < model.normalisation.dim(); ++d) {
    write_f64(os, model.normalisation.mins[d]);
    write_f64(os, model.normalisation.maxs[d]);
    write_u8(os, model.normalisation.constant[d] ? 1 : 0);
  }
  write_f64(os, model.dur_mean);
  write_f64(os, model.dur_std);
  write_u32(os, static_cast<std::uint32_t>(model.history.size()));
  for (const auto& e : model.history) {
    write_f64(os, e.train_loss);
    write_f64(os, e.dev_loss);
  }
  write_u32(os, static_cast<std::uint32_t>(model.best_epoch));
  save_network(model.network, os);
}

inline void save_model_file(const TrainedModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write model file: " + path);
  save_model(model, os);
}

inline TrainedModel load_model(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw DataError("not a durhaz model file (bad magic)");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kModelVersion) {
    throw DataError("unsupported model file version " + std::to_string(version));
  }
  TrainedModel model;
  model.kind = static_cast<SystemKind>(read_u8(is));
  model.counter.divisor = read_f64(is);
  model.counter.lo = read_f64(is);
  model.counter.hi = read_f64(is);
  const std::uint32_t dim = read_u32(is);
  model.normalisation.lo = read_f64(is);
  model.normalisation.hi = read_f64(is);
  model.normalisation.mins.resize(dim);
  model.normalisation.maxs.resize(dim);
  model.normalisation.constant.resize(dim);
  for (std::uint32_t d = 0; d < dim; ++d) {
    model.normalisation.mins[d] = read_f64(is);
    model.normalisation.maxs[d] = read_f64(is);
    model.normalisation.constant[d] = read_u8(is) != 0;
  }
  model.dur_mean = read_f64(is);
  model.dur_std = read_f64(is);
  const std::uint32_t n_hist = read_u32(is);
  model.history.resize(n_hist);
  for (auto& e : model.history) {
    e.train_loss = read_f64(is);
    e.dev_loss = read_f64(is);
  }
  model.best_epoch = static_cast<int>(read_u32(is));
  model.network = load_network(is);
  return model;
}

inline TrainedModel load_model_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file: " + path);
  return load_model(is);
}

inline std::string format_learning_curve(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,dev_loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += std::to_string(i + 1) + "," + fmt_double(history[i].train_loss) + "," +
           fmt_double(history[i].dev_loss) + "\n";
  }
  return out;
}

}  // namespace durhaz
