// Copyright 2026 The kgsome Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small feed-forward convolutional network: valid stride-1 convolution,
// non-overlapping max pooling, dense, inverted dropout and a softmax output
// trained with cross-entropy and plain SGD.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kgsome/errors.hpp"
#include "kgsome/random.hpp"

namespace kgsome {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), values(element_count(shape), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != element_count(shape)) throw ShapeError("value count does not match tensor shape");
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const Tensor&) const = default;
};

enum class Activation { linear, tanh, relu };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    default: return "linear";
  }
}

inline Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

enum class LayerKind { conv, maxpool, dense, dropout, softmax };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    default: return "softmax";
  }
}

inline LayerKind parse_layer_kind(std::string_view s) {
  for (auto k : {LayerKind::conv, LayerKind::maxpool, LayerKind::dense, LayerKind::dropout, LayerKind::softmax})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown layer kind '" + std::string(s) + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::softmax;
  int filters = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int pool = 0;
  int units = 0;
  double rate = 0.0;
  Activation activation = Activation::linear;

  static LayerSpec conv(int filters, int kh, int kw, Activation a) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.filters = filters;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.activation = a;
    return s;
  }
  static LayerSpec maxpool(int pool = 2) {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.pool = pool;
    return s;
  }
  static LayerSpec dense(int units, Activation a) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    s.activation = a;
    return s;
  }
  static LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.rate = rate;
    return s;
  }
  static LayerSpec softmax() { return {}; }

  bool operator==(const LayerSpec&) const = default;
};

struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t size() const noexcept { return channels * height * width; }
  bool operator==(const Shape3&) const = default;
};

namespace detail {
inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    default: return z;
  }
}
// Derivative expressed through the activation output y.
inline double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::tanh: return 1.0 - y * y;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    default: return 1.0;
  }
}

// Unrolled patches: col[k * P + p] with k = (c, di, dj) and p = (i, j), P the
// number of output positions.
inline void im2col(const double* in, Shape3 is, std::size_t kh, std::size_t kw, double* col) {
  const std::size_t oh = is.height - kh + 1, ow = is.width - kw + 1;
  for (std::size_t c = 0; c < is.channels; ++c)
    for (std::size_t di = 0; di < kh; ++di)
      for (std::size_t dj = 0; dj < kw; ++dj)
        for (std::size_t i = 0; i < oh; ++i) {
          const double* src = in + (c * is.height + i + di) * is.width + dj;
          std::copy(src, src + ow, col);
          col += ow;
        }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;

inline void conv_forward(const double* in, Shape3 is, const double* w, const double* b, std::size_t filters,
                         std::size_t kh, std::size_t kw, Activation act, double* out) {
  const auto oh = is.height - kh + 1, ow = is.width - kw + 1;
  const auto P = static_cast<Eigen::Index>(oh * ow), K = static_cast<Eigen::Index>(is.channels * kh * kw),
             F = static_cast<Eigen::Index>(filters);
  RowMat col(K, P);
  im2col(in, is, kh, kw, col.data());
  MatView o(out, F, P);
  o.noalias() = ConstMatView(w, F, K) * col;
  o.colwise() += Eigen::Map<const Eigen::VectorXd>(b, F);
  if (act != Activation::linear)
    for (Eigen::Index i = 0; i < F * P; ++i) out[i] = activate(act, out[i]);
}

// dz: gradient w.r.t. pre-activation output. Accumulates into gw, gb and
// (when non-null) gin.
inline void conv_backward(const double* in, Shape3 is, const double* w, std::size_t filters, std::size_t kh,
                          std::size_t kw, const double* dz, double* gw, double* gb, double* gin) {
  const auto oh = is.height - kh + 1, ow = is.width - kw + 1;
  const auto P = static_cast<Eigen::Index>(oh * ow), K = static_cast<Eigen::Index>(is.channels * kh * kw),
             F = static_cast<Eigen::Index>(filters);
  RowMat col(K, P);
  im2col(in, is, kh, kw, col.data());
  const ConstMatView d(dz, F, P);
  Eigen::Map<Eigen::VectorXd>(gb, F) += d.rowwise().sum();
  MatView(gw, F, K).noalias() += d * col.transpose();
  if (!gin) return;
  // Patch gradients, scattered back onto the input.
  col.noalias() = ConstMatView(w, F, K).transpose() * d;
  const double* src = col.data();
  for (std::size_t c = 0; c < is.channels; ++c)
    for (std::size_t di = 0; di < kh; ++di)
      for (std::size_t dj = 0; dj < kw; ++dj)
        for (std::size_t i = 0; i < oh; ++i) {
          double* dst = gin + (c * is.height + i + di) * is.width + dj;
          for (std::size_t j = 0; j < ow; ++j) dst[j] += src[j];
          src += ow;
        }
}

inline void maxpool_forward(const double* in, Shape3 is, std::size_t pool, double* out, std::size_t* argmax) {
  const std::size_t oh = is.height / pool, ow = is.width / pool;
  for (std::size_t c = 0; c < is.channels; ++c)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (c * is.height + i * pool) * is.width + j * pool;
        for (std::size_t di = 0; di < pool; ++di)
          for (std::size_t dj = 0; dj < pool; ++dj) {
            const std::size_t idx = (c * is.height + i * pool + di) * is.width + j * pool + dj;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (c * oh + i) * ow + j;
        out[o] = in[best];
        argmax[o] = best;
      }
}
}  // namespace detail

// out[f,i,j] = act(b_f + sum_{c,di,dj} w[f,c,di,dj] in[c,i+di,j+dj]).
inline Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& biases, Activation act) {
  if (input.shape.size() != 3 || weights.shape.size() != 4 || biases.shape.size() != 1)
    throw ShapeError("conv2d expects input (C,H,W), weights (F,C,kh,kw), biases (F)");
  const Shape3 is{input.shape[0], input.shape[1], input.shape[2]};
  const std::size_t f = weights.shape[0], kh = weights.shape[2], kw = weights.shape[3];
  if (weights.shape[1] != is.channels || biases.shape[0] != f) throw ShapeError("conv2d channel/filter mismatch");
  if (kh > is.height || kw > is.width) throw ShapeError("conv2d kernel larger than input");
  Tensor out({f, is.height - kh + 1, is.width - kw + 1});
  detail::conv_forward(input.values.data(), is, weights.values.data(), biases.values.data(), f, kh, kw, act,
                       out.values.data());
  return out;
}

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

// Non-overlapping pool x pool max; trailing rows/columns that do not fill a
// window are dropped.
inline PoolResult maxpool_forward(const Tensor& input, std::size_t pool = 2) {
  if (input.shape.size() != 3) throw ShapeError("maxpool expects input (C,H,W)");
  const Shape3 is{input.shape[0], input.shape[1], input.shape[2]};
  if (is.height < pool || is.width < pool) throw ShapeError("maxpool input smaller than the pool window");
  PoolResult r{Tensor({is.channels, is.height / pool, is.width / pool}), {}};
  r.argmax.resize(r.output.size());
  detail::maxpool_forward(input.values.data(), is, pool, r.output.values.data(), r.argmax.data());
  return r;
}

class CnnModel {
 public:
  CnnModel() = default;

  CnnModel(Shape3 input, std::vector<LayerSpec> layers, std::uint64_t seed = 0)
      : input_(input), layers_(std::move(layers)) {
    if (input_.size() == 0) throw ShapeError("input shape must be non-empty");
    if (layers_.empty() || layers_.back().kind != LayerKind::softmax)
      throw ShapeError("the final layer must be softmax");
    Shape3 s = input_;
    weights_.resize(layers_.size());
    biases_.resize(layers_.size());
    Rng rng(derive_seed(seed, {0xc011u}));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
      switch (l.kind) {
        case LayerKind::conv: {
          if (l.filters < 1 || l.kernel_h < 1 || l.kernel_w < 1) throw ShapeError(where + ": parameters must be positive");
          if (static_cast<std::size_t>(l.kernel_h) > s.height || static_cast<std::size_t>(l.kernel_w) > s.width)
            throw ShapeError(where + ": kernel " + std::to_string(l.kernel_h) + "x" + std::to_string(l.kernel_w) +
                             " larger than input " + std::to_string(s.height) + "x" + std::to_string(s.width));
          const std::size_t f = static_cast<std::size_t>(l.filters), kh = static_cast<std::size_t>(l.kernel_h),
                            kw = static_cast<std::size_t>(l.kernel_w);
          weights_[i] = Tensor({f, s.channels, kh, kw});
          biases_[i] = Tensor({f});
          glorot(weights_[i], s.channels * kh * kw, f * kh * kw, rng);
          s = {f, s.height - kh + 1, s.width - kw + 1};
          break;
        }
        case LayerKind::maxpool: {
          if (l.pool < 1) throw ShapeError(where + ": pool size must be positive");
          const auto p = static_cast<std::size_t>(l.pool);
          if (s.height < p || s.width < p)
            throw ShapeError(where + ": input " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                             " smaller than pool");
          s = {s.channels, s.height / p, s.width / p};
          break;
        }
        case LayerKind::dense: {
          if (l.units < 1) throw ShapeError(where + ": unit count must be positive");
          const auto u = static_cast<std::size_t>(l.units);
          weights_[i] = Tensor({u, s.size()});
          biases_[i] = Tensor({u});
          glorot(weights_[i], s.size(), u, rng);
          s = {u, 1, 1};
          break;
        }
        case LayerKind::dropout:
          if (!(l.rate >= 0.0 && l.rate < 1.0)) throw ShapeError(where + ": rate must lie in [0, 1)");
          break;
        case LayerKind::softmax:
          if (i + 1 != layers_.size()) throw ShapeError(where + ": softmax must be the final layer");
          if (s.size() < 2) throw ShapeError(where + ": softmax needs at least two classes");
          break;
      }
      shapes_.push_back(s);
    }
  }

  const Shape3& input_shape() const noexcept { return input_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const Shape3& output_shape(std::size_t layer) const { return shapes_.at(layer); }
  std::size_t num_classes() const { return shapes_.back().size(); }

  Tensor& weights(std::size_t layer) { return weights_.at(layer); }
  const Tensor& weights(std::size_t layer) const { return weights_.at(layer); }
  Tensor& biases(std::size_t layer) { return biases_.at(layer); }
  const Tensor& biases(std::size_t layer) const { return biases_.at(layer); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) n += weights_[i].size() + biases_[i].size();
    return n;
  }

  bool operator==(const CnnModel&) const = default;

 private:
  static void glorot(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& v : w.values) v = u(rng);
  }

  Shape3 input_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape3> shapes_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// Per-example forward state needed by backprop.
struct ForwardTrace {
  std::vector<std::vector<double>> outputs;        // per layer
  std::vector<std::vector<std::size_t>> argmax;    // maxpool layers
  std::vector<std::vector<double>> masks;          // dropout layers: 0 or 1/(1-rate)
};

namespace detail {
inline ForwardTrace forward_example(const CnnModel& m, std::span<const double> input, bool training,
                                    std::uint64_t dropout_seed) {
  ForwardTrace t;
  const auto& layers = m.layers();
  t.outputs.resize(layers.size());
  t.argmax.resize(layers.size());
  t.masks.resize(layers.size());
  Shape3 s = m.input_shape();
  const double* x = input.data();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const Shape3 os = m.output_shape(i);
    auto& out = t.outputs[i];
    out.resize(os.size());
    switch (l.kind) {
      case LayerKind::conv:
        conv_forward(x, s, m.weights(i).values.data(), m.biases(i).values.data(), os.channels,
                     static_cast<std::size_t>(l.kernel_h), static_cast<std::size_t>(l.kernel_w), l.activation,
                     out.data());
        break;
      case LayerKind::maxpool:
        t.argmax[i].resize(os.size());
        maxpool_forward(x, s, static_cast<std::size_t>(l.pool), out.data(), t.argmax[i].data());
        break;
      case LayerKind::dense: {
        const auto& w = m.weights(i).values;
        const auto& b = m.biases(i).values;
        const std::size_t n_in = s.size();
        for (std::size_t u = 0; u < os.size(); ++u) {
          double z = b[u];
          const double* wr = w.data() + u * n_in;
          for (std::size_t k = 0; k < n_in; ++k) z += wr[k] * x[k];
          out[u] = activate(l.activation, z);
        }
        break;
      }
      case LayerKind::dropout:
        if (training && l.rate > 0.0) {
          Rng rng(derive_seed(dropout_seed, {i}));
          std::bernoulli_distribution keep(1.0 - l.rate);
          auto& mask = t.masks[i];
          mask.resize(os.size());
          const double scale = 1.0 / (1.0 - l.rate);
          for (std::size_t k = 0; k < os.size(); ++k) {
            mask[k] = keep(rng) ? scale : 0.0;
            out[k] = x[k] * mask[k];
          }
        } else {
          std::copy(x, x + os.size(), out.begin());
        }
        break;
      case LayerKind::softmax: {
        const double mx = *std::max_element(x, x + os.size());
        double z = 0.0;
        for (std::size_t k = 0; k < os.size(); ++k) z += (out[k] = std::exp(x[k] - mx));
        for (auto& v : out) v /= z;
        break;
      }
    }
    x = out.data();
    s = os;
  }
  return t;
}
}  // namespace detail

struct Gradients {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  double loss = 0.0;  // mean cross-entropy over the batch
};

inline Gradients zero_gradients(const CnnModel& m) {
  Gradients g;
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    g.weights.push_back(Tensor(m.weights(i).shape));
    g.biases.push_back(Tensor(m.biases(i).shape));
  }
  return g;
}

namespace detail {
inline void check_batch(const CnnModel& m, const Tensor& batch) {
  const auto& is = m.input_shape();
  if (batch.shape.size() != 4 || batch.shape[1] != is.channels || batch.shape[2] != is.height ||
      batch.shape[3] != is.width)
    throw ShapeError("batch shape does not match model input (N," + std::to_string(is.channels) + "," +
                     std::to_string(is.height) + "," + std::to_string(is.width) + ")");
}

// Backprop of one example whose loss is weighted by `scale`; returns its
// unweighted cross-entropy.
inline double accumulate_example(const CnnModel& m, std::span<const double> input, int label, double scale,
                                 bool training, std::uint64_t dropout_seed, Gradients& g) {
  const auto t = forward_example(m, input, training, dropout_seed);
  const auto& layers = m.layers();
  const auto& probs = t.outputs.back();
  const double loss = -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));

  // Combined softmax + cross-entropy: dL/dlogits = p - onehot.
  std::vector<double> grad(probs.begin(), probs.end());
  grad[static_cast<std::size_t>(label)] -= 1.0;
  for (auto& v : grad) v *= scale;

  for (std::size_t li = layers.size() - 1; li-- > 0;) {
    const auto& l = layers[li];
    const Shape3 is = li == 0 ? m.input_shape() : m.output_shape(li - 1);
    const double* x = li == 0 ? input.data() : t.outputs[li - 1].data();
    const auto& y = t.outputs[li];
    const bool need_input_grad = li > 0;
    std::vector<double> gin(need_input_grad ? is.size() : 0, 0.0);
    switch (l.kind) {
      case LayerKind::conv: {
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= activation_slope(l.activation, y[k]);
        conv_backward(x, is, m.weights(li).values.data(), static_cast<std::size_t>(l.filters),
                      static_cast<std::size_t>(l.kernel_h), static_cast<std::size_t>(l.kernel_w), grad.data(),
                      g.weights[li].values.data(), g.biases[li].values.data(), need_input_grad ? gin.data() : nullptr);
        break;
      }
      case LayerKind::maxpool:
        if (need_input_grad)
          for (std::size_t k = 0; k < grad.size(); ++k) gin[t.argmax[li][k]] += grad[k];
        break;
      case LayerKind::dense: {
        const auto& w = m.weights(li).values;
        const std::size_t n_in = is.size();
        auto& gw = g.weights[li].values;
        auto& gb = g.biases[li].values;
        for (std::size_t u = 0; u < grad.size(); ++u) {
          const double dz = grad[u] * activation_slope(l.activation, y[u]);
          gb[u] += dz;
          double* gwr = gw.data() + u * n_in;
          const double* wr = w.data() + u * n_in;
          for (std::size_t k = 0; k < n_in; ++k) gwr[k] += dz * x[k];
          if (need_input_grad)
            for (std::size_t k = 0; k < n_in; ++k) gin[k] += dz * wr[k];
        }
        break;
      }
      case LayerKind::dropout:
        if (need_input_grad) {
          const auto& mask = t.masks[li];
          for (std::size_t k = 0; k < grad.size(); ++k) gin[k] = mask.empty() ? grad[k] : grad[k] * mask[k];
        }
        break;
      case LayerKind::softmax:
        break;
    }
    if (!need_input_grad) break;
    grad = std::move(gin);
  }
  return loss;
}
}  // namespace detail

// Class probabilities, shape (N, classes). Dropout is active only when
// `training`; masks are drawn from derive_seed(dropout_seed, {n}) per example.
inline Tensor forward(const CnnModel& m, const Tensor& batch, bool training = false, std::uint64_t dropout_seed = 0) {
  detail::check_batch(m, batch);
  const std::size_t n = batch.shape[0], per = m.input_shape().size(), c = m.num_classes();
  Tensor out({n, c});
  for (std::size_t e = 0; e < n; ++e) {
    const auto t = detail::forward_example(m, {batch.values.data() + e * per, per}, training,
                                           derive_seed(dropout_seed, {e}));
    std::copy(t.outputs.back().begin(), t.outputs.back().end(), out.values.begin() + static_cast<std::ptrdiff_t>(e * c));
  }
  return out;
}

// Mean cross-entropy and its gradient for every trainable tensor. The dropout
// masks are those forward() draws with the same seed.
inline Gradients backward(const CnnModel& m, const Tensor& batch, std::span<const int> labels, bool training = true,
                          std::uint64_t dropout_seed = 0) {
  detail::check_batch(m, batch);
  const std::size_t n = batch.shape[0], per = m.input_shape().size();
  if (labels.size() != n) throw ValidationError("one label per example required");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= m.num_classes())
      throw ValidationError("label " + std::to_string(l) + " out of range");
  Gradients g = zero_gradients(m);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t e = 0; e < n; ++e)
    g.loss += scale * detail::accumulate_example(m, {batch.values.data() + e * per, per}, labels[e], scale, training,
                                                 derive_seed(dropout_seed, {e}), g);
  return g;
}

inline double cross_entropy(const CnnModel& m, const Tensor& batch, std::span<const int> labels, bool training = false,
                            std::uint64_t dropout_seed = 0) {
  const auto p = forward(m, batch, training, dropout_seed);
  const std::size_t c = m.num_classes();
  double s = 0.0;
  for (std::size_t e = 0; e < labels.size(); ++e)
    s -= std::log(std::max(p.values[e * c + static_cast<std::size_t>(labels[e])], 1e-300));
  return s / static_cast<double>(labels.size());
}

inline void sgd_step(CnnModel& m, const Gradients& g, double step) {
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    auto& w = m.weights(i).values;
    auto& b = m.biases(i).values;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= step * g.weights[i].values[k];
    for (std::size_t k = 0; k < b.size(); ++k) b[k] -= step * g.biases[i].values[k];
  }
}

struct LabeledTensor {
  Tensor input;  // (C,H,W)
  int label = 0;
};

struct CnnTrainConfig {
  int epochs = 150;
  double step_size = 0.05;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

// Called after every epoch with the zero-based epoch index.
using EpochObserver = std::function<void(int, const CnnModel&)>;

// Seeded per-epoch shuffling and plain mini-batch SGD. Returns the mean
// training loss of each epoch.
inline std::vector<double> train_cnn(CnnModel& m, std::span<const LabeledTensor> data, const CnnTrainConfig& cfg,
                                     const EpochObserver& on_epoch = {}) {
  if (data.empty()) throw DatasetError("training set is empty");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.step_size < 0.0) throw ConfigError("invalid CNN training settings");
  const std::size_t per = m.input_shape().size();
  for (const auto& d : data) {
    if (d.input.size() != per) throw ShapeError("training example does not match model input");
    if (d.label < 0 || static_cast<std::size_t>(d.label) >= m.num_classes())
      throw ValidationError("label " + std::to_string(d.label) + " out of range");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> trace;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, {0xe90cu, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Gradients g = zero_gradients(m);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = data[order[b]];
        const auto seed = derive_seed(cfg.seed, {0xd209u, static_cast<std::uint64_t>(epoch), b});
        total += detail::accumulate_example(m, ex.input.values, ex.label, scale, true, seed, g);
      }
      if (!std::isfinite(total)) throw TrainingError("non-finite CNN loss at epoch " + std::to_string(epoch));
      sgd_step(m, g, cfg.step_size);
    }
    trace.push_back(total / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(epoch, m);
  }
  return trace;
}

inline std::vector<double> predict_proba(const CnnModel& m, const Tensor& input) {
  const std::size_t per = m.input_shape().size();
  if (input.size() != per) throw ShapeError("input does not match model");
  return detail::forward_example(m, input.values, false, 0).outputs.back();
}

inline int predict_class(const CnnModel& m, const Tensor& input) {
  const auto p = predict_proba(m, input);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline double accuracy(const CnnModel& m, std::span<const LabeledTensor> data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& d : data) ok += predict_class(m, d.input) == d.label ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

// conv(71, 3x3) -> maxpool 2x2 -> conv(88, 2x2) -> maxpool 2x2 -> dropout 0.5
// -> dense(26) -> dense(classes) -> softmax.
inline CnnModel build_some_cnn(Shape3 input, std::size_t num_classes = 2, Activation act = Activation::tanh,
                               std::uint64_t seed = 0) {
  if (input.height < 8 || input.width < 8)
    throw ShapeError("SOME network needs spatial input of at least 8x8, got " + std::to_string(input.height) + "x" +
                     std::to_string(input.width));
  if (num_classes < 2) throw ConfigError("need at least two classes");
  return CnnModel(input,
                  {LayerSpec::conv(71, 3, 3, act), LayerSpec::maxpool(2), LayerSpec::conv(88, 2, 2, act),
                   LayerSpec::maxpool(2), LayerSpec::dropout(0.5), LayerSpec::dense(26, act),
                   LayerSpec::dense(static_cast<int>(num_classes), Activation::linear), LayerSpec::softmax()},
                  seed);
}

}  // namespace kgsome
