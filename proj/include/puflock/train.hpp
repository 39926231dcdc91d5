#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "puflock/dataset.hpp"
#include "puflock/errors.hpp"
#include "puflock/model.hpp"
#include "puflock/rng.hpp"

namespace puflock {

struct TrainConfig {
  std::vector<int> hidden_dims{64};
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t rng_seed = 1;

  void validate() const {
    for (int h : hidden_dims) {
      if (h < 1) throw ConfigError("TrainConfig: hidden dims must be >= 1");
    }
    if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) {
      throw ConfigError("TrainConfig: learning_rate must be > 0");
    }
  }
};

namespace detail {

/// Double-precision MLP used by the SGD loop. Training runs entirely in
/// binary64 with a fixed operation order and is cast to binary32 once at the
/// end, so identical seeds give bit-identical models.
struct Mlp64 {
  std::vector<int> dims;  // layer widths, input first
  std::vector<std::vector<double>> weights;  // per link: out x in, row-major
  std::vector<std::vector<double>> biases;

  static Mlp64 init(std::vector<int> dims, SplitMix64& rng) {
    Mlp64 net;
    net.dims = std::move(dims);
    const std::size_t links = net.dims.size() - 1;
    net.weights.resize(links);
    net.biases.resize(links);
    for (std::size_t l = 0; l < links; ++l) {
      const int fan_in = net.dims[l];
      const int fan_out = net.dims[l + 1];
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      net.weights[l].resize(static_cast<std::size_t>(fan_out) * fan_in);
      for (double& w : net.weights[l]) {
        w = limit * (2.0 * rng.next_double() - 1.0);
      }
      net.biases[l].assign(fan_out, 0.0);
    }
    return net;
  }

  std::size_t num_links() const { return weights.size(); }

  /// Forward pass for one sample; fills per-layer activations
  /// (activations[0] = input, activations[L] = logits).
  void forward(std::span<const float> input,
               std::vector<std::vector<double>>& activations) const {
    activations.resize(num_links() + 1);
    activations[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < num_links(); ++l) {
      const int in_dim = dims[l];
      const int out_dim = dims[l + 1];
      std::vector<double>& out = activations[l + 1];
      out.assign(out_dim, 0.0);
      for (int o = 0; o < out_dim; ++o) {
        const double* row =
            weights[l].data() + static_cast<std::size_t>(o) * in_dim;
        double acc = biases[l][o];
        for (int i = 0; i < in_dim; ++i) acc += row[i] * activations[l][i];
        const bool relu = l + 1 < num_links();
        out[o] = (relu && acc < 0.0) ? 0.0 : acc;
      }
    }
  }

  /// Mean softmax cross-entropy over a batch of sample indices.
  double loss(const Dataset& data, std::span<const std::size_t> batch) const {
    std::vector<std::vector<double>> acts;
    double total = 0.0;
    for (std::size_t idx : batch) {
      forward(data.row(idx), acts);
      total += cross_entropy(acts.back(), data.labels[idx]);
    }
    return total / static_cast<double>(batch.size());
  }

  /// Analytic gradients of the mean batch loss, same layout as the params.
  void gradients(const Dataset& data, std::span<const std::size_t> batch,
                 std::vector<std::vector<double>>& grad_w,
                 std::vector<std::vector<double>>& grad_b) const {
    grad_w.resize(num_links());
    grad_b.resize(num_links());
    for (std::size_t l = 0; l < num_links(); ++l) {
      grad_w[l].assign(weights[l].size(), 0.0);
      grad_b[l].assign(biases[l].size(), 0.0);
    }
    std::vector<std::vector<double>> acts;
    std::vector<double> delta, delta_prev;
    for (std::size_t idx : batch) {
      forward(data.row(idx), acts);
      // d(loss)/d(logits) = softmax - onehot
      delta = softmax(acts.back());
      delta[data.labels[idx]] -= 1.0;
      for (std::size_t l = num_links(); l-- > 0;) {
        const int in_dim = dims[l];
        const int out_dim = dims[l + 1];
        for (int o = 0; o < out_dim; ++o) {
          const double d = delta[o];
          double* grow = grad_w[l].data() + static_cast<std::size_t>(o) * in_dim;
          for (int i = 0; i < in_dim; ++i) grow[i] += d * acts[l][i];
          grad_b[l][o] += d;
        }
        if (l == 0) break;
        delta_prev.assign(in_dim, 0.0);
        for (int o = 0; o < out_dim; ++o) {
          const double d = delta[o];
          const double* row =
              weights[l].data() + static_cast<std::size_t>(o) * in_dim;
          for (int i = 0; i < in_dim; ++i) delta_prev[i] += row[i] * d;
        }
        // ReLU gate: hidden activations are zero exactly where clipped
        for (int i = 0; i < in_dim; ++i) {
          if (acts[l][i] <= 0.0) delta_prev[i] = 0.0;
        }
        delta.swap(delta_prev);
      }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t l = 0; l < num_links(); ++l) {
      for (double& g : grad_w[l]) g *= inv;
      for (double& g : grad_b[l]) g *= inv;
    }
  }

  void sgd_step(const std::vector<std::vector<double>>& grad_w,
                const std::vector<std::vector<double>>& grad_b, double lr) {
    for (std::size_t l = 0; l < num_links(); ++l) {
      for (std::size_t i = 0; i < weights[l].size(); ++i) {
        weights[l][i] -= lr * grad_w[l][i];
      }
      for (std::size_t i = 0; i < biases[l].size(); ++i) {
        biases[l][i] -= lr * grad_b[l][i];
      }
    }
  }

  Model to_model() const {
    Model model;
    model.layers.resize(num_links());
    for (std::size_t l = 0; l < num_links(); ++l) {
      DenseLayer& layer = model.layers[l];
      layer.in_dim = static_cast<std::uint32_t>(dims[l]);
      layer.out_dim = static_cast<std::uint32_t>(dims[l + 1]);
      layer.activation =
          l + 1 < num_links() ? Activation::kRelu : Activation::kNone;
      layer.weights.resize(weights[l].size());
      for (std::size_t i = 0; i < weights[l].size(); ++i) {
        layer.weights[i] = static_cast<float>(weights[l][i]);
      }
      layer.bias.resize(biases[l].size());
      for (std::size_t i = 0; i < biases[l].size(); ++i) {
        layer.bias[i] = static_cast<float>(biases[l][i]);
      }
    }
    model.num_classes = static_cast<std::uint32_t>(dims.back());
    return model;
  }

  static std::vector<double> softmax(const std::vector<double>& logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      p[i] = std::exp(logits[i] - peak);
      sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
  }

  static double cross_entropy(const std::vector<double>& logits, int label) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - peak);
    return std::log(sum) + peak - logits[label];
  }
};

}  // namespace detail

/// Mini-batch SGD on softmax cross-entropy, ReLU hidden layers, Glorot
/// uniform init, zero biases. Deterministic in (data, config).
inline Model train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  data.validate();
  if (data.num_classes < 2) {
    throw ConfigError("train: dataset must have >= 2 classes");
  }

  std::vector<int> dims;
  dims.push_back(static_cast<int>(data.feature_dim));
  dims.insert(dims.end(), config.hidden_dims.begin(),
              config.hidden_dims.end());
  dims.push_back(static_cast<int>(data.num_classes));

  SplitMix64 rng(config.rng_seed);
  detail::Mlp64 net = detail::Mlp64::init(dims, rng);

  const std::size_t n = data.num_samples();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> grad_w, grad_b;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.next_below(i + 1)]);
    }
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(config.batch_size, n - start);
      net.gradients(data, std::span(order).subspan(start, count), grad_w,
                    grad_b);
      net.sgd_step(grad_w, grad_b, config.learning_rate);
    }
  }

  Model model = net.to_model();
  model.validate();
  return model;
}

}  // namespace puflock
