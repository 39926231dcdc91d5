#pragma once

#include <cstdint>
#include <string>

#include "puflock/bytes.hpp"
#include "puflock/errors.hpp"
#include "puflock/model.hpp"

namespace puflock {

// NNBM model file, little-endian:
//   magic "NNBM", version u16 = 1, layer_count u16;
//   per layer: kind u8 (0 = dense), activation u8 (0 = none, 1 = relu),
//              in_dim u32, out_dim u32,
//              in_dim*out_dim weight f32 row-major, out_dim bias f32.
inline constexpr char kModelMagic[4] = {'N', 'N', 'B', 'M'};
inline constexpr std::uint16_t kModelVersion = 1;

inline void save_model(const Model& model, const std::string& path) {
  model.validate();
  if (model.layers.size() > 0xFFFF) {
    throw ConfigError("save_model: too many layers");
  }
  detail::ByteWriter out;
  out.bytes(reinterpret_cast<const std::uint8_t*>(kModelMagic), 4);
  out.u16le(kModelVersion);
  out.u16le(static_cast<std::uint16_t>(model.layers.size()));
  for (const DenseLayer& layer : model.layers) {
    out.u8(0);  // dense
    out.u8(static_cast<std::uint8_t>(layer.activation));
    out.u32le(layer.in_dim);
    out.u32le(layer.out_dim);
    for (float w : layer.weights) out.f32le(w);
    for (float b : layer.bias) out.f32le(b);
  }
  out.save(path);
}

inline Model load_model(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader in(bytes, "load_model: " + path);
  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(in.u8());
  if (std::string_view(magic, 4) != std::string_view(kModelMagic, 4)) {
    throw ParseError("load_model: " + path +
                     ": bad magic at offset 0: expected \"NNBM\", got \"" +
                     std::string(magic, 4) + "\"");
  }
  const std::uint16_t version = in.u16le();
  if (version != kModelVersion) {
    throw ParseError("load_model: " + path + ": unsupported version " +
                     std::to_string(version) + ", expected " +
                     std::to_string(kModelVersion));
  }
  const std::uint16_t layer_count = in.u16le();
  if (layer_count == 0) in.fail("model has no layers");

  Model model;
  model.layers.resize(layer_count);
  for (std::uint16_t l = 0; l < layer_count; ++l) {
    in.set_section("layer " + std::to_string(l));
    DenseLayer& layer = model.layers[l];
    const std::uint8_t kind = in.u8();
    if (kind != 0) {
      in.fail("unsupported layer kind " + std::to_string(kind));
    }
    const std::uint8_t activation = in.u8();
    if (activation > 1) {
      in.fail("unsupported activation " + std::to_string(activation));
    }
    layer.activation = static_cast<Activation>(activation);
    layer.in_dim = in.u32le();
    layer.out_dim = in.u32le();
    if (layer.in_dim == 0 || layer.out_dim == 0) in.fail("zero dimension");
    const std::uint64_t weight_count =
        static_cast<std::uint64_t>(layer.in_dim) * layer.out_dim;
    if ((weight_count + layer.out_dim) * 4 > in.remaining()) {
      in.fail("truncated: layer needs " +
              std::to_string((weight_count + layer.out_dim) * 4) +
              " bytes of parameters, have " + std::to_string(in.remaining()));
    }
    layer.weights.resize(weight_count);
    for (float& w : layer.weights) w = in.f32le();
    layer.bias.resize(layer.out_dim);
    for (float& b : layer.bias) b = in.f32le();
  }
  in.set_section("");
  in.expect_end();
  model.num_classes = model.layers.back().out_dim;
  try {
    model.validate();
  } catch (const DimensionError& e) {
    throw ParseError("load_model: " + path + ": " + e.what());
  }
  return model;
}

}  // namespace puflock
