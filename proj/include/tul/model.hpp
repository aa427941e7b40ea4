#pragma once

// Small dense ReLU classifier with explicit forward pass, penultimate-layer
// embedding extraction, and analytic gradients of the regularized
// cross-entropy objective. Double precision throughout; every operation is a
// pure function with a fixed summation order, so results are bit-reproducible.
//
// Checkpoint format "TUCK" v1:
//   magic "TUCK", u32 version, u32 dim count, u32 dims...,
//   then per layer: weights row-major (out x in) as f64 LE, then bias.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tul/common.hpp"
#include "tul/dataset.hpp"
#include "tul/rng.hpp"

namespace tul {

// layer_dims = [d, h1, ..., hk, C]; hidden layers use ReLU, the output layer
// is linear. At least one hidden layer is required.
struct MlpSpec {
  std::vector<std::size_t> layer_dims;

  void validate() const {
    if (layer_dims.size() < 3)
      throw DomainError("MlpSpec: need input, at least one hidden, and output layer");
    for (std::size_t d : layer_dims)
      if (d == 0) throw DomainError("MlpSpec: all layer dims must be >= 1");
  }

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t embedding_dim() const {
    return layer_dims[layer_dims.size() - 2];
  }
  std::size_t num_layers() const { return layer_dims.size() - 1; }
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
};

struct ModelParams {
  MlpSpec spec;
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return spec.input_dim(); }
  std::size_t num_classes() const { return spec.output_dim(); }
  std::size_t embedding_dim() const { return spec.embedding_dim(); }

  void validate() const {
    spec.validate();
    if (layers.size() != spec.num_layers())
      throw DataError("ModelParams: layer count does not match spec");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const DenseLayer& L = layers[l];
      if (L.in != spec.layer_dims[l] || L.out != spec.layer_dims[l + 1] ||
          L.weights.size() != L.in * L.out || L.bias.size() != L.out)
        throw DataError("ModelParams: layer " + std::to_string(l) +
                        " shape inconsistent with spec");
      for (double w : L.weights)
        if (!std::isfinite(w))
          throw DataError("ModelParams: non-finite weight in layer " +
                          std::to_string(l));
      for (double b : L.bias)
        if (!std::isfinite(b))
          throw DataError("ModelParams: non-finite bias in layer " +
                          std::to_string(l));
    }
  }
};

// Shape-congruent with ModelParams.
struct Gradients {
  std::vector<DenseLayer> layers;
};

namespace detail {

inline DenseLayer zero_layer(std::size_t in, std::size_t out) {
  DenseLayer L;
  L.in = in;
  L.out = out;
  L.weights.assign(in * out, 0.0);
  L.bias.assign(out, 0.0);
  return L;
}

// Weights ~ Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero, drawn
// row-major from the layer's own stream.
inline DenseLayer init_layer(std::size_t in, std::size_t out,
                             std::uint64_t stream_seed) {
  DenseLayer L = zero_layer(in, out);
  Rng rng(stream_seed);
  const double bound = std::sqrt(6.0 / double(in));
  for (double& w : L.weights) w = rng.uniform(-bound, bound);
  return L;
}

}  // namespace detail

inline Gradients zero_gradients(const ModelParams& params) {
  Gradients g;
  g.layers.reserve(params.layers.size());
  for (const DenseLayer& L : params.layers)
    g.layers.push_back(detail::zero_layer(L.in, L.out));
  return g;
}

inline ModelParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  p.layers.reserve(spec.num_layers());
  for (std::size_t l = 0; l < spec.num_layers(); ++l)
    p.layers.push_back(detail::init_layer(
        spec.layer_dims[l], spec.layer_dims[l + 1],
        derive_seed(seed, seed_tag::init, l)));
  return p;
}

// Copies all body layers bit-exactly and redraws the output layer for
// `new_classes` outputs. The head stream is tagged separately from init so a
// redraw differs from the original even under the same numeric seed.
inline ModelParams replace_head(const ModelParams& params,
                                std::uint32_t new_classes,
                                std::uint64_t seed) {
  if (new_classes == 0)
    throw DomainError("replace_head: class count must be >= 1");
  ModelParams p = params;
  const std::size_t last = p.layers.size() - 1;
  p.spec.layer_dims.back() = new_classes;
  p.layers[last] = detail::init_layer(
      p.layers[last].in, new_classes,
      derive_seed(seed, seed_tag::head, last));
  return p;
}

struct ForwardResult {
  std::vector<double> logits;
  std::vector<double> embedding;  // post-ReLU penultimate activations
};

namespace detail {

// activations[0] = input, activations[l] = post-ReLU output of hidden layer
// l-1 for l in 1..k, activations[k+1] = logits.
inline void forward_cached(const ModelParams& params,
                           const std::vector<double>& x,
                           std::vector<std::vector<double>>& activations) {
  activations.resize(params.layers.size() + 1);
  activations[0] = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& L = params.layers[l];
    const std::vector<double>& in = activations[l];
    std::vector<double>& out = activations[l + 1];
    out.assign(L.out, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      double acc = L.bias[o];
      const double* wrow = L.weights.data() + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) acc += wrow[i] * in[i];
      out[o] = acc;
    }
    const bool is_output = (l + 1 == params.layers.size());
    if (!is_output)
      for (double& v : out) v = v > 0.0 ? v : 0.0;
  }
}

// Stable softmax probabilities and the cross-entropy for the given label.
inline double softmax_xent(const std::vector<double>& logits,
                           std::uint32_t label, std::vector<double>& probs) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double z = 0.0;
  probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
  return std::log(z) + m - logits[label];
}

}  // namespace detail

inline ForwardResult forward(const ModelParams& params,
                             const std::vector<double>& x) {
  if (x.size() != params.input_dim())
    throw DomainError("forward: input has dimension " +
                      std::to_string(x.size()) + ", model expects " +
                      std::to_string(params.input_dim()));
  std::vector<std::vector<double>> acts;
  detail::forward_cached(params, x, acts);
  ForwardResult r;
  r.logits = acts.back();
  r.embedding = acts[acts.size() - 2];
  return r;
}

// Mean cross-entropy over the batch plus (weight_decay/2) * sum of squared
// weights (biases exempt). `data_sign` flips only the data-loss gradient,
// leaving the decay term descending; the returned loss is always the
// unsigned objective.
inline std::pair<double, Gradients> loss_and_grad_signed(
    const ModelParams& params, const std::vector<Example>& batch,
    double weight_decay, double data_sign) {
  if (batch.empty())
    throw DomainError("loss_and_grad: batch must be non-empty");
  const std::size_t n = batch.size();
  const std::size_t num_layers = params.layers.size();

  Gradients g = zero_gradients(params);
  double total_xent = 0.0;
  std::vector<std::vector<double>> acts;
  std::vector<double> probs;
  std::vector<double> delta, delta_prev;

  for (const Example& e : batch) {
    if (e.features.size() != params.input_dim())
      throw DomainError("loss_and_grad: example dimension mismatch");
    if (e.label >= params.num_classes())
      throw DomainError("loss_and_grad: label " + std::to_string(e.label) +
                        " out of range");
    detail::forward_cached(params, e.features, acts);
    total_xent += detail::softmax_xent(acts.back(), e.label, probs);

    delta = probs;
    delta[e.label] -= 1.0;
    for (std::size_t l = num_layers; l-- > 0;) {
      const DenseLayer& L = params.layers[l];
      DenseLayer& G = g.layers[l];
      const std::vector<double>& in = acts[l];
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta[o];
        double* grow = G.weights.data() + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) grow[i] += d * in[i];
        G.bias[o] += d;
      }
      if (l > 0) {
        delta_prev.assign(L.in, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
          const double d = delta[o];
          const double* wrow = L.weights.data() + o * L.in;
          for (std::size_t i = 0; i < L.in; ++i) delta_prev[i] += wrow[i] * d;
        }
        // ReLU mask: acts[l] holds the post-activation values.
        for (std::size_t i = 0; i < L.in; ++i)
          if (in[i] <= 0.0) delta_prev[i] = 0.0;
        delta = delta_prev;
      }
    }
  }

  double sq_weights = 0.0;
  const double inv_n = 1.0 / double(n);
  for (std::size_t l = 0; l < num_layers; ++l) {
    const DenseLayer& L = params.layers[l];
    DenseLayer& G = g.layers[l];
    for (std::size_t i = 0; i < L.weights.size(); ++i) {
      sq_weights += L.weights[i] * L.weights[i];
      G.weights[i] = data_sign * (G.weights[i] * inv_n) +
                     weight_decay * L.weights[i];
    }
    for (std::size_t i = 0; i < L.bias.size(); ++i)
      G.bias[i] = data_sign * (G.bias[i] * inv_n);
  }

  const double loss =
      total_xent * inv_n + 0.5 * weight_decay * sq_weights;
  return {loss, std::move(g)};
}

inline std::pair<double, Gradients> loss_and_grad(
    const ModelParams& params, const std::vector<Example>& batch,
    double weight_decay) {
  return loss_and_grad_signed(params, batch, weight_decay, 1.0);
}

// ---------------------------------------------------------------------------
// Checkpoints.

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

inline std::string serialize_params(const ModelParams& params) {
  params.validate();
  ByteWriter w;
  w.magic("TUCK");
  w.u32(kCheckpointFormatVersion);
  w.u32(static_cast<std::uint32_t>(params.spec.layer_dims.size()));
  for (std::size_t d : params.spec.layer_dims)
    w.u32(static_cast<std::uint32_t>(d));
  for (const DenseLayer& L : params.layers) {
    for (double v : L.weights) w.f64(v);
    for (double v : L.bias) w.f64(v);
  }
  return w.take();
}

inline ModelParams deserialize_params(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("TUCK", "TUCK checkpoint");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointFormatVersion)
    throw ParseError("unsupported TUCK version " + std::to_string(version),
                     r.offset());
  const std::uint32_t dims = r.u32("dim count");
  MlpSpec spec;
  spec.layer_dims.resize(dims);
  for (std::uint32_t i = 0; i < dims; ++i) spec.layer_dims[i] = r.u32("dim");
  spec.validate();

  ModelParams p;
  p.spec = spec;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    DenseLayer L = detail::zero_layer(spec.layer_dims[l], spec.layer_dims[l + 1]);
    for (double& v : L.weights)
      v = r.f64(("layer " + std::to_string(l) + " weight").c_str());
    for (double& v : L.bias)
      v = r.f64(("layer " + std::to_string(l) + " bias").c_str());
    p.layers.push_back(std::move(L));
  }
  r.expect_end("TUCK");
  p.validate();
  return p;
}

inline void save_params(const ModelParams& params, const std::string& path) {
  write_file(path, serialize_params(params));
}

inline ModelParams load_params(const std::string& path) {
  return deserialize_params(read_file(path));
}

inline bool params_equal(const ModelParams& a, const ModelParams& b) {
  return serialize_params(a) == serialize_params(b);
}

}  // namespace tul
