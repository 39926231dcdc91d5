#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "puflock/bytes.hpp"
#include "puflock/errors.hpp"
#include "puflock/rng.hpp"

namespace puflock {

/// Labeled feature vectors for accuracy evaluation.
struct Dataset {
  std::uint32_t feature_dim = 0;
  std::uint32_t num_classes = 0;
  std::vector<float> features;       // num_samples x feature_dim, row-major
  std::vector<std::int32_t> labels;  // each in [0, num_classes)

  std::size_t num_samples() const { return labels.size(); }

  std::span<const float> row(std::size_t idx) const {
    return std::span<const float>(features).subspan(idx * feature_dim,
                                                    feature_dim);
  }

  void validate() const {
    if (labels.empty()) throw ConfigError("Dataset: no samples");
    if (feature_dim == 0) throw ConfigError("Dataset: feature_dim is 0");
    if (features.size() != labels.size() * feature_dim) {
      throw DimensionError(
          "Dataset: feature matrix size does not match sample count");
    }
    for (std::int32_t label : labels) {
      if (label < 0 || static_cast<std::uint32_t>(label) >= num_classes) {
        throw ConfigError("Dataset: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }

  /// Per-class sample counts (size num_classes).
  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::int32_t label : labels) ++counts[label];
    return counts;
  }

  /// True when every class appears equally often.
  bool balanced() const {
    const auto counts = class_counts();
    return std::all_of(counts.begin(), counts.end(),
                       [&](std::size_t c) { return c == counts[0]; });
  }
};

/// Gaussian blob dataset: `classes` means drawn uniformly on the radius-R
/// sphere, per_class samples of mean + N(0, sigma^2 I) each, labels balanced
/// and class-major. Deterministic in rng_seed.
inline Dataset gen_synthetic(std::uint64_t rng_seed, int classes, int dim,
                             int per_class, double radius, double sigma) {
  if (classes < 2) throw ConfigError("gen_synthetic: classes must be >= 2");
  if (dim < 1) throw ConfigError("gen_synthetic: dim must be >= 1");
  if (per_class < 1) throw ConfigError("gen_synthetic: per_class must be >= 1");
  if (!(radius > 0.0)) throw ConfigError("gen_synthetic: radius must be > 0");
  if (!(sigma > 0.0)) throw ConfigError("gen_synthetic: sigma must be > 0");

  SplitMix64 rng(rng_seed);

  std::vector<double> means(static_cast<std::size_t>(classes) * dim);
  for (int c = 0; c < classes; ++c) {
    double* mean = means.data() + static_cast<std::size_t>(c) * dim;
    double norm_sq = 0.0;
    for (int j = 0; j < dim; ++j) {
      mean[j] = rng.next_normal();
      norm_sq += mean[j] * mean[j];
    }
    const double norm = std::sqrt(norm_sq);
    const double scale = norm > 0.0 ? radius / norm : 0.0;
    for (int j = 0; j < dim; ++j) mean[j] *= scale;
  }

  Dataset data;
  data.feature_dim = static_cast<std::uint32_t>(dim);
  data.num_classes = static_cast<std::uint32_t>(classes);
  data.features.reserve(static_cast<std::size_t>(classes) * per_class * dim);
  data.labels.reserve(static_cast<std::size_t>(classes) * per_class);
  for (int c = 0; c < classes; ++c) {
    const double* mean = means.data() + static_cast<std::size_t>(c) * dim;
    for (int s = 0; s < per_class; ++s) {
      for (int j = 0; j < dim; ++j) {
        data.features.push_back(
            static_cast<float>(mean[j] + sigma * rng.next_normal()));
      }
      data.labels.push_back(c);
    }
  }
  return data;
}

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Load an IDX image/label file pair (the MNIST container format). Pixel
/// bytes are scaled to [0, 1] binary32 and flattened row-major.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  const auto image_bytes = detail::read_file(images_path);
  detail::ByteReader images(image_bytes, "load_idx: " + images_path);
  const std::uint32_t images_magic = images.u32be();
  if (images_magic != kIdxImagesMagic) {
    char got[16];
    std::snprintf(got, sizeof got, "0x%08X", images_magic);
    throw ParseError("load_idx: " + images_path +
                     ": bad magic at offset 0: expected 0x00000803, got " +
                     got);
  }
  const std::uint32_t image_count = images.u32be();
  const std::uint32_t rows = images.u32be();
  const std::uint32_t cols = images.u32be();
  const std::uint64_t dim = static_cast<std::uint64_t>(rows) * cols;
  if (dim == 0) images.fail("image dimensions are zero");
  const std::uint8_t* pixels =
      images.raw(static_cast<std::size_t>(image_count) * dim);
  images.expect_end();

  const auto label_bytes = detail::read_file(labels_path);
  detail::ByteReader labels(label_bytes, "load_idx: " + labels_path);
  const std::uint32_t labels_magic = labels.u32be();
  if (labels_magic != kIdxLabelsMagic) {
    char got[16];
    std::snprintf(got, sizeof got, "0x%08X", labels_magic);
    throw ParseError("load_idx: " + labels_path +
                     ": bad magic at offset 0: expected 0x00000801, got " +
                     got);
  }
  const std::uint32_t label_count = labels.u32be();
  if (label_count != image_count) {
    throw ParseError("load_idx: " + labels_path + ": label count " +
                     std::to_string(label_count) + " at offset 4 != image count " +
                     std::to_string(image_count));
  }
  const std::uint8_t* label_data = labels.raw(label_count);
  labels.expect_end();

  Dataset data;
  data.feature_dim = static_cast<std::uint32_t>(dim);
  data.features.resize(static_cast<std::size_t>(image_count) * dim);
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    data.features[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  data.labels.assign(label_data, label_data + label_count);
  std::int32_t max_label = 0;
  for (std::int32_t label : data.labels) max_label = std::max(max_label, label);
  data.num_classes = static_cast<std::uint32_t>(max_label) + 1;
  if (image_count > 0) data.validate();
  return data;
}

/// Write a dataset as an IDX image/label pair (images N x 1 x feature_dim).
/// Features are affinely quantized to bytes over their global [min, max]
/// range, so a reloaded dataset holds values in [0, 1].
inline void save_idx(const Dataset& data, const std::string& images_path,
                     const std::string& labels_path) {
  data.validate();
  if (data.num_samples() > 0xFFFFFFFFull) {
    throw ConfigError("save_idx: too many samples for IDX");
  }
  float lo = data.features[0];
  float hi = data.features[0];
  for (float v : data.features) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = hi > lo ? 255.0 / (static_cast<double>(hi) - lo) : 0.0;

  detail::ByteWriter images;
  images.u32be(kIdxImagesMagic);
  images.u32be(static_cast<std::uint32_t>(data.num_samples()));
  images.u32be(1);
  images.u32be(data.feature_dim);
  for (float v : data.features) {
    const double q = std::lround((static_cast<double>(v) - lo) * scale);
    images.u8(static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0)));
  }
  images.save(images_path);

  detail::ByteWriter labels;
  labels.u32be(kIdxLabelsMagic);
  labels.u32be(static_cast<std::uint32_t>(data.num_samples()));
  for (std::int32_t label : data.labels) {
    if (label > 255) throw ConfigError("save_idx: label > 255");
    labels.u8(static_cast<std::uint8_t>(label));
  }
  labels.save(labels_path);
}

}  // namespace puflock
