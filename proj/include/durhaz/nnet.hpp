// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "durhaz/errors.hpp"
#include "durhaz/io.hpp"
#include "durhaz/matrix.hpp"
#include "durhaz/rng.hpp"

namespace durhaz {

// Minimal sequence-regression engine: a stack of dense layers with an
// optional unidirectional LSTM as the last hidden layer, trained by full
// backpropagation through time and plain SGD. Scalar output per frame.

enum class LayerKind : std::uint8_t {
  DenseTanh = 0,
  DenseLinear = 1,
  DenseSigmoid = 2,
  Recurrent = 3,
};

struct LayerSpec {
  LayerKind kind;
  int width;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int max_epochs = 25;
  int patience = 5;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
  double clip_norm = 0.0;  // L2 gradient clipping per update; 0 disables
};

inline void check_train_config(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw InvalidArgumentError("learning_rate must be > 0");
  if (cfg.max_epochs < 1) throw InvalidArgumentError("max_epochs must be >= 1");
  if (cfg.patience < 1 || cfg.patience > cfg.max_epochs) {
    throw InvalidArgumentError("patience must lie in [1, max_epochs]");
  }
  if (cfg.init_scale <= 0.0) throw InvalidArgumentError("init_scale must be > 0");
  if (cfg.clip_norm < 0.0) throw InvalidArgumentError("clip_norm must be >= 0");
}

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

struct DenseLayer {
  LayerKind kind = LayerKind::DenseLinear;
  Matrix w;               // out x in
  std::vector<double> b;  // out
};

// Standard LSTM cell: input/forget/output gates plus tanh candidate, gate
// rows stacked [i; f; o; g] in the weight matrices.
struct LstmLayer {
  Matrix wx;              // 4H x in
  Matrix wh;              // 4H x H
  std::vector<double> b;  // 4H
};

using Layer = std::variant<DenseLayer, LstmLayer>;

inline int layer_output_width(const Layer& layer) {
  if (std::holds_alternative<DenseLayer>(layer)) {
    return static_cast<int>(std::get<DenseLayer>(layer).w.rows());
  }
  return static_cast<int>(std::get<LstmLayer>(layer).wh.cols());
}

// Per-frame activation record kept by the BPTT forward pass.
struct DenseCache {
  std::vector<double> out;
};
struct LstmCache {
  std::vector<double> h_prev, c_prev;
  std::vector<double> gi, gf, go, gg;  // post-nonlinearity gate values
  std::vector<double> c, tanh_c, h;
};
using LayerCache = std::variant<DenseCache, LstmCache>;

class Network {
 public:
  Network() = default;

  int input_width() const { return input_width_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }

  bool has_recurrent_layer() const {
    for (const auto& s : specs_) {
      if (s.kind == LayerKind::Recurrent) return true;
    }
    return false;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        n += d->w.size() + d->b.size();
      } else {
        const auto& l = std::get<LstmLayer>(layer);
        n += l.wx.size() + l.wh.size() + l.b.size();
      }
    }
    return n;
  }

  /// Zeroes all recurrent hidden and cell state.
  void reset_state() {
    for (auto& h : state_h_) std::fill(h.begin(), h.end(), 0.0);
    for (auto& c : state_c_) std::fill(c.begin(), c.end(), 0.0);
  }

  /// One-frame forward pass on the persistent recurrent state. Returns the
  /// scalar output for this frame.
  double step(std::span<const double> row) {
    check_row(row);
    return eval_frame(row.data(), state_h_, state_c_, nullptr);
  }

  /// Forward pass over a whole sequence on the persistent state. The state is
  /// not reset here; callers decide whether to carry or reset it.
  std::vector<double> forward(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(step(row));
    return out;
  }

  // --- parameter access in canonical (serialisation) order ---------------

  std::vector<double*> parameter_pointers() {
    std::vector<double*> ptrs;
    ptrs.reserve(parameter_count());
    for (auto& layer : layers_) {
      if (auto* d = std::get_if<DenseLayer>(&layer)) {
        for (std::size_t i = 0; i < d->w.size(); ++i) ptrs.push_back(d->w.data() + i);
        for (auto& v : d->b) ptrs.push_back(&v);
      } else {
        auto& l = std::get<LstmLayer>(layer);
        for (std::size_t i = 0; i < l.wx.size(); ++i) ptrs.push_back(l.wx.data() + i);
        for (std::size_t i = 0; i < l.wh.size(); ++i) ptrs.push_back(l.wh.data() + i);
        for (auto& v : l.b) ptrs.push_back(&v);
      }
    }
    return ptrs;
  }

  std::vector<double> flatten_parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    auto ptrs = const_cast<Network*>(this)->parameter_pointers();
    for (double* p : ptrs) out.push_back(*p);
    return out;
  }

  void set_parameters(std::span<const double> values) {
    auto ptrs = parameter_pointers();
    if (values.size() != ptrs.size()) {
      throw InvalidGradientError("parameter vector size mismatch");
    }
    for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = values[i];
  }

 private:
  friend Network init_network(const std::vector<LayerSpec>&, int, std::uint64_t, double);
  friend double backward_sequence(const Network&, const std::vector<std::vector<double>>&,
                                  const std::vector<double>&, std::vector<double>&);
  friend double sequence_loss(const Network&, const std::vector<std::vector<double>>&,
                              const std::vector<double>&,
                              std::vector<double>*);
  friend void save_network(const Network&, std::ostream&);
  friend Network load_network(std::istream&);

  void check_row(std::span<const double> row) const {
    if (static_cast<int>(row.size()) != input_width_) {
      throw InvalidInputError("input row width " + std::to_string(row.size()) +
                              " != network input width " + std::to_string(input_width_));
    }
  }

  void allocate_state() {
    state_h_.assign(layers_.size(), {});
    state_c_.assign(layers_.size(), {});
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      if (std::holds_alternative<LstmLayer>(layers_[li])) {
        const int width = layer_output_width(layers_[li]);
        state_h_[li].assign(width, 0.0);
        state_c_[li].assign(width, 0.0);
      }
    }
  }

  // Shared forward math for one frame over explicit state buffers. When
  // `caches` is non-null, per-layer activations are appended for BPTT.
  double eval_frame(const double* x, std::vector<std::vector<double>>& hs,
                    std::vector<std::vector<double>>& cs,
                    std::vector<LayerCache>* caches) const {
    std::vector<double> buf(x, x + input_width_);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      if (const auto* d = std::get_if<DenseLayer>(&layers_[li])) {
        std::vector<double> out = d->b;
        matvec_accumulate(d->w, buf.data(), out.data());
        switch (d->kind) {
          case LayerKind::DenseTanh:
            for (auto& v : out) v = std::tanh(v);
            break;
          case LayerKind::DenseSigmoid:
            for (auto& v : out) v = detail::sigmoid(v);
            break;
          default:
            break;
        }
        if (caches) caches->push_back(DenseCache{out});
        buf = std::move(out);
      } else {
        const auto& l = std::get<LstmLayer>(layers_[li]);
        const int width = static_cast<int>(l.wh.cols());
        std::vector<double> pre = l.b;
        matvec_accumulate(l.wx, buf.data(), pre.data());
        matvec_accumulate(l.wh, hs[li].data(), pre.data());
        LstmCache cache;
        cache.h_prev = hs[li];
        cache.c_prev = cs[li];
        cache.gi.resize(width);
        cache.gf.resize(width);
        cache.go.resize(width);
        cache.gg.resize(width);
        cache.c.resize(width);
        cache.tanh_c.resize(width);
        cache.h.resize(width);
        for (int j = 0; j < width; ++j) {
          const double i_g = detail::sigmoid(pre[j]);
          const double f_g = detail::sigmoid(pre[width + j]);
          const double o_g = detail::sigmoid(pre[2 * width + j]);
          const double g_g = std::tanh(pre[3 * width + j]);
          const double c_new = f_g * cs[li][j] + i_g * g_g;
          const double tc = std::tanh(c_new);
          cache.gi[j] = i_g;
          cache.gf[j] = f_g;
          cache.go[j] = o_g;
          cache.gg[j] = g_g;
          cache.c[j] = c_new;
          cache.tanh_c[j] = tc;
          cache.h[j] = o_g * tc;
        }
        hs[li] = cache.h;
        cs[li] = cache.c;
        buf = cache.h;
        if (caches) caches->push_back(std::move(cache));
      }
    }
    return buf[0];
  }

  int input_width_ = 0;
  std::vector<LayerSpec> specs_;
  std::vector<Layer> layers_;
  std::vector<std::vector<double>> state_h_, state_c_;
};

/// Builds a network with weights drawn uniformly from
/// [-init_scale, init_scale]; the same seed reproduces the same weights
/// bit for bit. The layer stack must end in a width-1 dense layer, and a
/// recurrent layer, if any, must be the last hidden layer.
inline Network init_network(const std::vector<LayerSpec>& specs, int input_width,
                            std::uint64_t seed, double init_scale = 0.1) {
  if (specs.empty()) throw InvalidArchitectureError("network needs at least one layer");
  if (input_width < 1) throw InvalidArchitectureError("input width must be >= 1");
  int recurrent_count = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].width < 1) {
      throw InvalidArchitectureError("layer " + std::to_string(i) + " width must be >= 1");
    }
    if (specs[i].kind == LayerKind::Recurrent) {
      ++recurrent_count;
      if (i + 2 != specs.size()) {
        throw InvalidArchitectureError(
            "a recurrent layer must be the last hidden layer (directly before "
            "the output layer)");
      }
    }
  }
  if (recurrent_count > 1) {
    throw InvalidArchitectureError("at most one recurrent layer is supported");
  }
  const LayerSpec& out_spec = specs.back();
  if (out_spec.kind == LayerKind::Recurrent || out_spec.width != 1) {
    throw InvalidArchitectureError("output layer must be dense with width 1");
  }

  Network net;
  net.input_width_ = input_width;
  net.specs_ = specs;
  Rng rng(seed);
  int in_width = input_width;
  for (const auto& spec : specs) {
    if (spec.kind == LayerKind::Recurrent) {
      LstmLayer l;
      l.wx = Matrix(4 * spec.width, in_width);
      l.wh = Matrix(4 * spec.width, spec.width);
      l.b.assign(4 * spec.width, 0.0);
      for (std::size_t i = 0; i < l.wx.size(); ++i) {
        l.wx.data()[i] = rng.uniform(-init_scale, init_scale);
      }
      for (std::size_t i = 0; i < l.wh.size(); ++i) {
        l.wh.data()[i] = rng.uniform(-init_scale, init_scale);
      }
      for (auto& v : l.b) v = rng.uniform(-init_scale, init_scale);
      net.layers_.emplace_back(std::move(l));
    } else {
      DenseLayer d;
      d.kind = spec.kind;
      d.w = Matrix(spec.width, in_width);
      d.b.assign(spec.width, 0.0);
      for (std::size_t i = 0; i < d.w.size(); ++i) {
        d.w.data()[i] = rng.uniform(-init_scale, init_scale);
      }
      for (auto& v : d.b) v = rng.uniform(-init_scale, init_scale);
      net.layers_.emplace_back(std::move(d));
    }
    in_width = spec.width;
  }
  net.allocate_state();
  return net;
}

/// Convenience wrapper matching the operation vocabulary.
inline std::vector<double> forward_sequence(Network& net,
                                            const std::vector<std::vector<double>>& rows) {
  return net.forward(rows);
}

/// Sum-of-squares loss over a sequence, evaluated from a zero recurrent state
/// without touching the network's persistent state. When `predictions` is
/// non-null the per-frame outputs are stored there too.
inline double sequence_loss(const Network& net, const std::vector<std::vector<double>>& rows,
                            const std::vector<double>& targets,
                            std::vector<double>* predictions = nullptr) {
  if (rows.size() != targets.size()) {
    throw InvalidInputError("inputs and targets differ in length");
  }
  std::vector<std::vector<double>> hs(net.layers_.size()), cs(net.layers_.size());
  for (std::size_t li = 0; li < net.layers_.size(); ++li) {
    if (std::holds_alternative<LstmLayer>(net.layers_[li])) {
      const int w = layer_output_width(net.layers_[li]);
      hs[li].assign(w, 0.0);
      cs[li].assign(w, 0.0);
    }
  }
  double loss = 0.0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    net.check_row(rows[t]);
    const double y = net.eval_frame(rows[t].data(), hs, cs, nullptr);
    if (predictions) predictions->push_back(y);
    const double e = targets[t] - y;
    loss += e * e;
  }
  return loss;
}

/// Full-sequence backpropagation through time from a zero recurrent state.
/// Appends nothing to the network; gradients (canonical parameter order) are
/// written to `grads` and the summed squared-error loss is returned.
inline double backward_sequence(const Network& net,
                                const std::vector<std::vector<double>>& rows,
                                const std::vector<double>& targets,
                                std::vector<double>& grads) {
  if (rows.size() != targets.size()) {
    throw InvalidInputError("inputs and targets differ in length");
  }
  const std::size_t n_layers = net.layers_.size();

  // forward with caches
  std::vector<std::vector<double>> hs(n_layers), cs(n_layers);
  for (std::size_t li = 0; li < n_layers; ++li) {
    if (std::holds_alternative<LstmLayer>(net.layers_[li])) {
      const int w = layer_output_width(net.layers_[li]);
      hs[li].assign(w, 0.0);
      cs[li].assign(w, 0.0);
    }
  }
  std::vector<std::vector<LayerCache>> caches(rows.size());
  std::vector<double> outputs(rows.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    net.check_row(rows[t]);
    caches[t].reserve(n_layers);
    outputs[t] = net.eval_frame(rows[t].data(), hs, cs, &caches[t]);
    const double e = targets[t] - outputs[t];
    loss += e * e;
  }

  // shaped gradient buffers
  std::vector<Matrix> gw(n_layers), gwh(n_layers);
  std::vector<std::vector<double>> gb(n_layers);
  for (std::size_t li = 0; li < n_layers; ++li) {
    if (const auto* d = std::get_if<DenseLayer>(&net.layers_[li])) {
      gw[li] = Matrix(d->w.rows(), d->w.cols());
      gb[li].assign(d->b.size(), 0.0);
    } else {
      const auto& l = std::get<LstmLayer>(net.layers_[li]);
      gw[li] = Matrix(l.wx.rows(), l.wx.cols());
      gwh[li] = Matrix(l.wh.rows(), l.wh.cols());
      gb[li].assign(l.b.size(), 0.0);
    }
  }

  // carries between timesteps, per recurrent layer
  std::vector<std::vector<double>> dh_carry(n_layers), dc_carry(n_layers);
  for (std::size_t li = 0; li < n_layers; ++li) {
    if (std::holds_alternative<LstmLayer>(net.layers_[li])) {
      const int w = layer_output_width(net.layers_[li]);
      dh_carry[li].assign(w, 0.0);
      dc_carry[li].assign(w, 0.0);
    }
  }

  for (std::size_t tt = rows.size(); tt-- > 0;) {
    // d loss / d output for this frame
    std::vector<double> dvec{2.0 * (outputs[tt] - targets[tt])};
    for (std::size_t li = n_layers; li-- > 0;) {
      const auto& cache = caches[tt][li];
      // layer input: previous layer's output this frame, or the data row
      const std::vector<double>* below = nullptr;
      std::vector<double> row_copy;
      if (li == 0) {
        row_copy = rows[tt];
        below = &row_copy;
      } else if (const auto* dc = std::get_if<DenseCache>(&caches[tt][li - 1])) {
        below = &dc->out;
      } else {
        below = &std::get<LstmCache>(caches[tt][li - 1]).h;
      }

      if (const auto* d = std::get_if<DenseLayer>(&net.layers_[li])) {
        const auto& out = std::get<DenseCache>(cache).out;
        std::vector<double> dpre(out.size());
        for (std::size_t j = 0; j < out.size(); ++j) {
          double deriv = 1.0;
          if (d->kind == LayerKind::DenseTanh) {
            deriv = 1.0 - out[j] * out[j];
          } else if (d->kind == LayerKind::DenseSigmoid) {
            deriv = out[j] * (1.0 - out[j]);
          }
          dpre[j] = dvec[j] * deriv;
        }
        outer_accumulate(gw[li], dpre.data(), below->data());
        for (std::size_t j = 0; j < dpre.size(); ++j) gb[li][j] += dpre[j];
        std::vector<double> dbelow(below->size(), 0.0);
        matvec_transpose_accumulate(d->w, dpre.data(), dbelow.data());
        dvec = std::move(dbelow);
      } else {
        const auto& l = std::get<LstmLayer>(net.layers_[li]);
        const auto& lc = std::get<LstmCache>(cache);
        const int width = static_cast<int>(l.wh.cols());
        std::vector<double> dh(width), dc(width);
        for (int j = 0; j < width; ++j) {
          dh[j] = dvec[j] + dh_carry[li][j];
          dc[j] = dc_carry[li][j] +
                  dh[j] * lc.go[j] * (1.0 - lc.tanh_c[j] * lc.tanh_c[j]);
        }
        std::vector<double> dpre(4 * width);
        for (int j = 0; j < width; ++j) {
          const double d_o = dh[j] * lc.tanh_c[j];
          const double d_f = dc[j] * lc.c_prev[j];
          const double d_i = dc[j] * lc.gg[j];
          const double d_g = dc[j] * lc.gi[j];
          dpre[j] = d_i * lc.gi[j] * (1.0 - lc.gi[j]);
          dpre[width + j] = d_f * lc.gf[j] * (1.0 - lc.gf[j]);
          dpre[2 * width + j] = d_o * lc.go[j] * (1.0 - lc.go[j]);
          dpre[3 * width + j] = d_g * (1.0 - lc.gg[j] * lc.gg[j]);
        }
        outer_accumulate(gw[li], dpre.data(), below->data());   // d wx
        outer_accumulate(gwh[li], dpre.data(), lc.h_prev.data());  // d wh
        for (int j = 0; j < 4 * width; ++j) gb[li][j] += dpre[j];
        std::fill(dh_carry[li].begin(), dh_carry[li].end(), 0.0);
        matvec_transpose_accumulate(l.wh, dpre.data(), dh_carry[li].data());
        for (int j = 0; j < width; ++j) dc_carry[li][j] = dc[j] * lc.gf[j];
        std::vector<double> dbelow(l.wx.cols(), 0.0);
        matvec_transpose_accumulate(l.wx, dpre.data(), dbelow.data());
        dvec = std::move(dbelow);
      }
    }
  }

  // flatten in canonical order
  grads.clear();
  grads.reserve(const_cast<Network&>(net).parameter_count());
  for (std::size_t li = 0; li < n_layers; ++li) {
    if (std::holds_alternative<DenseLayer>(net.layers_[li])) {
      for (std::size_t i = 0; i < gw[li].size(); ++i) grads.push_back(gw[li].data()[i]);
      for (double v : gb[li]) grads.push_back(v);
    } else {
      for (std::size_t i = 0; i < gw[li].size(); ++i) grads.push_back(gw[li].data()[i]);
      for (std::size_t i = 0; i < gwh[li].size(); ++i) grads.push_back(gwh[li].data()[i]);
      for (double v : gb[li]) grads.push_back(v);
    }
  }
  return loss;
}

/// In-place SGD update: w <- w - lr * g, elementwise in canonical order.
inline void sgd_step(Network& net, const std::vector<double>& grads, double learning_rate) {
  auto ptrs = net.parameter_pointers();
  if (grads.size() != ptrs.size()) {
    throw InvalidGradientError("gradient size " + std::to_string(grads.size()) +
                               " != parameter count " + std::to_string(ptrs.size()));
  }
  for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] -= learning_rate * grads[i];
}

/// Rescales the gradient to L2 norm `max_norm` when it exceeds it.
inline void clip_gradient_norm(std::vector<double>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) g *= scale;
  }
}

/// Human-readable location of a flattened parameter index, for gradient-check
/// reports.
inline std::string describe_param(const Network& net, std::size_t index) {
  std::size_t offset = 0;
  const auto& layers = net.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    if (const auto* d = std::get_if<DenseLayer>(&layers[li])) {
      if (index < offset + d->w.size()) {
        const std::size_t k = index - offset;
        return "layer " + std::to_string(li) + " dense w(" +
               std::to_string(k / d->w.cols()) + "," + std::to_string(k % d->w.cols()) + ")";
      }
      offset += d->w.size();
      if (index < offset + d->b.size()) {
        return "layer " + std::to_string(li) + " dense b(" +
               std::to_string(index - offset) + ")";
      }
      offset += d->b.size();
    } else {
      const auto& l = std::get<LstmLayer>(layers[li]);
      const std::size_t width = l.wh.cols();
      const char* gates = "ifog";
      auto gate_of_row = [&](std::size_t row) { return gates[row / width]; };
      if (index < offset + l.wx.size()) {
        const std::size_t k = index - offset;
        const std::size_t row = k / l.wx.cols();
        return std::string("layer ") + std::to_string(li) + " lstm wx[" +
               gate_of_row(row) + "](" + std::to_string(row % width) + "," +
               std::to_string(k % l.wx.cols()) + ")";
      }
      offset += l.wx.size();
      if (index < offset + l.wh.size()) {
        const std::size_t k = index - offset;
        const std::size_t row = k / l.wh.cols();
        return std::string("layer ") + std::to_string(li) + " lstm wh[" +
               gate_of_row(row) + "](" + std::to_string(row % width) + "," +
               std::to_string(k % l.wh.cols()) + ")";
      }
      offset += l.wh.size();
      if (index < offset + l.b.size()) {
        const std::size_t k = index - offset;
        return std::string("layer ") + std::to_string(li) + " lstm b[" +
               gate_of_row(k) + "](" + std::to_string(k % width) + ")";
      }
      offset += l.b.size();
    }
  }
  return "param " + std::to_string(index);
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_param;
  double tolerance = 1e-4;
  bool pass = false;
};

/// Compares analytic BPTT gradients against central finite differences.
/// Intended for small networks; guarded at 10,000 parameters.
inline GradCheckReport gradient_check(const Network& net,
                                      const std::vector<std::vector<double>>& rows,
                                      const std::vector<double>& targets,
                                      double step = 1e-5, double tolerance = 1e-4,
                                      const std::vector<double>* analytic_override = nullptr) {
  Network work = net;
  const std::size_t n_params = work.parameter_count();
  if (n_params > 10000) {
    throw InvalidArgumentError("gradient_check is limited to 10,000 parameters");
  }
  std::vector<double> analytic;
  if (analytic_override != nullptr) {
    analytic = *analytic_override;
    if (analytic.size() != n_params) {
      throw InvalidGradientError("analytic gradient size mismatch");
    }
  } else {
    backward_sequence(work, rows, targets, analytic);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  auto ptrs = work.parameter_pointers();
  for (std::size_t i = 0; i < n_params; ++i) {
    const double saved = *ptrs[i];
    *ptrs[i] = saved + step;
    const double up = sequence_loss(work, rows, targets);
    *ptrs[i] = saved - step;
    const double down = sequence_loss(work, rows, targets);
    *ptrs[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-3);
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  report.worst_param = describe_param(work, report.worst_index);
  report.pass = report.max_rel_error < tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Serialisation. Versioned binary, little-endian throughout:
//   magic "DHNT" | u32 version | u32 input_width | u32 n_layers
//   per layer: u8 kind, u32 width
//   parameters as f64 in canonical order (dense: W row-major then b;
//   lstm: Wx row-major, Wh row-major, then b; gate rows stacked i,f,o,g).
// Recurrent runtime state is not stored; loading yields a reset network.
// ---------------------------------------------------------------------------

inline constexpr char kNetworkMagic[4] = {'D', 'H', 'N', 'T'};
inline constexpr std::uint32_t kNetworkVersion = 1;

inline void save_network(const Network& net, std::ostream& os) {
  os.write(kNetworkMagic, 4);
  write_u32(os, kNetworkVersion);
  write_u32(os, static_cast<std::uint32_t>(net.input_width_));
  write_u32(os, static_cast<std::uint32_t>(net.specs_.size()));
  for (const auto& spec : net.specs_) {
    write_u8(os, static_cast<std::uint8_t>(spec.kind));
    write_u32(os, static_cast<std::uint32_t>(spec.width));
  }
  for (double v : net.flatten_parameters()) write_f64(os, v);
}

inline Network load_network(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kNetworkMagic, 4) != 0) {
    throw DataError("not a durhaz network file (bad magic)");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kNetworkVersion) {
    throw DataError("unsupported network file version " + std::to_string(version));
  }
  const int input_width = static_cast<int>(read_u32(is));
  const std::uint32_t n_layers = read_u32(is);
  std::vector<LayerSpec> specs;
  specs.reserve(n_layers);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto kind = static_cast<LayerKind>(read_u8(is));
    const int width = static_cast<int>(read_u32(is));
    specs.push_back({kind, width});
  }
  Network net = init_network(specs, input_width, /*seed=*/0, /*init_scale=*/1.0);
  std::vector<double> params(net.parameter_count());
  for (auto& v : params) v = read_f64(is);
  net.set_parameters(params);
  net.reset_state();
  return net;
}

}  // namespace durhaz
