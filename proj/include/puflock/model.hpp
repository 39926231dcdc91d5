#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "puflock/dataset.hpp"
#include "puflock/errors.hpp"

namespace puflock {

enum class Activation : std::uint8_t { kNone = 0, kRelu = 1 };

/// One fully connected layer. Weights are binary32 bit patterns, row-major
/// out_dim x in_dim; any 32-bit pattern is legal (encrypted weights routinely
/// decode to NaN/Inf and inference must run them unchanged).
struct DenseLayer {
  std::uint32_t in_dim = 0;
  std::uint32_t out_dim = 0;
  std::vector<float> weights;  // out_dim x in_dim, row-major
  std::vector<float> bias;     // out_dim
  Activation activation = Activation::kNone;

  std::size_t weight_count() const { return weights.size(); }

  void validate(std::size_t layer_index) const {
    const std::string where = "layer " + std::to_string(layer_index);
    if (in_dim == 0 || out_dim == 0) {
      throw DimensionError(where + ": zero dimension");
    }
    if (weights.size() !=
        static_cast<std::size_t>(in_dim) * out_dim) {
      throw DimensionError(where + ": weight count " +
                           std::to_string(weights.size()) + " != " +
                           std::to_string(in_dim) + "*" +
                           std::to_string(out_dim));
    }
    if (bias.size() != out_dim) {
      throw DimensionError(where + ": bias count " +
                           std::to_string(bias.size()) + " != out_dim " +
                           std::to_string(out_dim));
    }
  }
};

/// Ordered dense layers; the IP being protected.
struct Model {
  std::vector<DenseLayer> layers;
  std::uint32_t num_classes = 0;

  void validate() const {
    if (layers.empty()) throw DimensionError("Model: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].validate(l);
      if (l > 0 && layers[l].in_dim != layers[l - 1].out_dim) {
        throw DimensionError("Model: layer " + std::to_string(l) +
                             " in_dim " + std::to_string(layers[l].in_dim) +
                             " != layer " + std::to_string(l - 1) +
                             " out_dim " +
                             std::to_string(layers[l - 1].out_dim));
      }
    }
    if (num_classes != layers.back().out_dim) {
      throw DimensionError("Model: num_classes " +
                           std::to_string(num_classes) +
                           " != last layer out_dim " +
                           std::to_string(layers.back().out_dim));
    }
  }

  std::uint32_t input_dim() const { return layers.front().in_dim; }
};

/// Affine + activation composition in binary32. NaN/Inf propagate per
/// IEEE-754; nothing is sanitized.
inline std::vector<float> forward(const Model& model,
                                  std::span<const float> input) {
  if (model.layers.empty()) throw DimensionError("forward: model has no layers");
  if (input.size() != model.input_dim()) {
    throw DimensionError("forward: input has " +
                         std::to_string(input.size()) + " features, model expects " +
                         std::to_string(model.input_dim()));
  }
  std::vector<float> act(input.begin(), input.end());
  std::vector<float> next;
  for (const DenseLayer& layer : model.layers) {
    next.assign(layer.out_dim, 0.0f);
    for (std::uint32_t o = 0; o < layer.out_dim; ++o) {
      const float* row =
          layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
      float acc = layer.bias[o];
      for (std::uint32_t i = 0; i < layer.in_dim; ++i) {
        acc += row[i] * act[i];
      }
      // (acc < 0 ? 0 : acc) keeps NaN, unlike std::max(0.f, acc)
      next[o] =
          (layer.activation == Activation::kRelu && acc < 0.0f) ? 0.0f : acc;
    }
    act.swap(next);
  }
  return act;
}

/// Argmax over logits under a total order: NaN compares below every real
/// (including -Inf), ties break toward the lowest class index, and all-NaN
/// logits yield class 0.
inline int argmax_class(std::span<const float> logits) {
  int best = 0;
  float best_val = logits[0];
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    const float v = logits[i];
    if (std::isnan(v)) continue;
    if (std::isnan(best_val) || v > best_val) {
      best = i;
      best_val = v;
    }
  }
  return best;
}

inline int predict(const Model& model, std::span<const float> input) {
  const std::vector<float> logits = forward(model, input);
  return argmax_class(logits);
}

/// Fraction of samples whose prediction equals the label; exact rational
/// correct / N.
inline double evaluate(const Model& model, const Dataset& data) {
  if (data.num_samples() == 0) throw ConfigError("evaluate: empty dataset");
  if (data.feature_dim != model.input_dim()) {
    throw DimensionError("evaluate: dataset dim " +
                         std::to_string(data.feature_dim) +
                         " != model input dim " +
                         std::to_string(model.input_dim()));
  }
  std::size_t correct = 0;
  for (std::size_t n = 0; n < data.num_samples(); ++n) {
    if (predict(model, data.row(n)) == data.labels[n]) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(data.num_samples());
}

/// Bit-pattern equality of two models (NaN payloads compare equal to
/// themselves, unlike float ==).
inline bool bit_identical(const Model& a, const Model& b) {
  if (a.num_classes != b.num_classes || a.layers.size() != b.layers.size()) {
    return false;
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const DenseLayer& la = a.layers[l];
    const DenseLayer& lb = b.layers[l];
    if (la.in_dim != lb.in_dim || la.out_dim != lb.out_dim ||
        la.activation != lb.activation ||
        la.weights.size() != lb.weights.size() ||
        la.bias.size() != lb.bias.size()) {
      return false;
    }
    for (std::size_t i = 0; i < la.weights.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(la.weights[i]) !=
          std::bit_cast<std::uint32_t>(lb.weights[i])) {
        return false;
      }
    }
    for (std::size_t i = 0; i < la.bias.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(la.bias[i]) !=
          std::bit_cast<std::uint32_t>(lb.bias[i])) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace puflock
