#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "puflock/bytes.hpp"
#include "puflock/errors.hpp"
#include "puflock/model.hpp"
#include "puflock/puf.hpp"
#include "puflock/rng.hpp"

namespace puflock {

/// Public per-weight bookkeeping needed for decryption: which weights of one
/// layer are encrypted and which challenge reproduces each key. Contains no
/// key material — responses exist only on the machine holding the PUF.
struct HelperEntry {
  std::uint32_t flat_index = 0;     // row-major index into the layer's weights
  std::uint64_t challenge_seed = 0;

  bool operator==(const HelperEntry&) const = default;
};

struct HelperData {
  std::uint16_t layer_id = 0;
  std::vector<HelperEntry> entries;  // strictly ascending by flat_index

  bool operator==(const HelperData&) const = default;

  void validate() const {
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].flat_index <= entries[i - 1].flat_index) {
        throw ConfigError("HelperData: entries not strictly ascending at entry " +
                          std::to_string(i));
      }
    }
  }
};

/// Uniform sample without replacement of floor(pct/100 * weight_count) flat
/// indices via seeded partial Fisher-Yates, returned sorted ascending.
///
/// With a fixed seed, a smaller pct yields a prefix of the same underlying
/// permutation, so selections at decreasing percentages are nested — the
/// sweep harness's nested mode relies on this.
inline std::vector<std::uint32_t> choose_weights(std::size_t weight_count,
                                                 double pct,
                                                 std::uint64_t rng_seed) {
  if (weight_count < 1) {
    throw ConfigError("choose_weights: weight_count must be >= 1");
  }
  if (weight_count > 0xFFFFFFFFull) {
    throw ConfigError("choose_weights: weight_count exceeds 32-bit indices");
  }
  if (!(pct >= 0.0 && pct <= 100.0)) {
    throw ConfigError("choose_weights: pct must be in [0, 100], got " +
                      std::to_string(pct));
  }
  // (pct * count) / 100 keeps integral percentages exact in double arithmetic
  const auto take = static_cast<std::size_t>(
      std::floor(pct * static_cast<double>(weight_count) / 100.0));

  std::vector<std::uint32_t> perm(weight_count);
  std::iota(perm.begin(), perm.end(), 0u);
  SplitMix64 rng(rng_seed);
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(perm[i], perm[i + rng.next_below(weight_count - i)]);
  }
  std::vector<std::uint32_t> indices(perm.begin(), perm.begin() + take);
  std::sort(indices.begin(), indices.end());
  return indices;
}

/// Vernam step for one weight: bitwise XOR of the binary32 pattern with the
/// 32-bit PUF response. Self-inverse.
constexpr std::uint32_t encrypt_weight(std::uint32_t weight_bits,
                                       std::uint32_t key_bits) {
  return weight_bits ^ key_bits;
}

namespace detail {

// Challenge seeds come from a stream decorrelated from the selection stream;
// rebind uses its own tag so re-keying never repeats the original challenges.
inline constexpr std::uint64_t kEncryptChallengeTag = 0x1F83D9ABFB41BD6BULL;
inline constexpr std::uint64_t kRebindChallengeTag = 0x5BE0CD19137E2179ULL;

/// XOR the listed weights of one layer with fresh PUF keys, in ascending
/// index order. Challenge seeds are drawn from chal_rng, rejecting duplicates
/// so every key within the helper file is used once.
inline HelperData encrypt_indices(Model& model, int layer_id,
                                  const std::vector<std::uint32_t>& indices,
                                  const XorArbiterPuf& puf,
                                  SplitMix64& chal_rng) {
  DenseLayer& layer = model.layers[layer_id];
  HelperData helper;
  helper.layer_id = static_cast<std::uint16_t>(layer_id);
  helper.entries.reserve(indices.size());
  std::unordered_set<std::uint64_t> used;
  used.reserve(indices.size() * 2);
  for (std::uint32_t idx : indices) {
    std::uint64_t seed;
    do {
      seed = chal_rng.next();
    } while (!used.insert(seed).second);
    const std::uint32_t key = puf.response32(Challenge{seed});
    layer.weights[idx] = std::bit_cast<float>(encrypt_weight(
        std::bit_cast<std::uint32_t>(layer.weights[idx]), key));
    helper.entries.push_back({idx, seed});
  }
  return helper;
}

inline void check_layer_id(const Model& model, int layer_id,
                           const char* what) {
  if (layer_id < 0 ||
      static_cast<std::size_t>(layer_id) >= model.layers.size()) {
    throw DimensionError(std::string(what) + ": layer " +
                         std::to_string(layer_id) + " out of range, model has " +
                         std::to_string(model.layers.size()) + " layers");
  }
  if (layer_id > 0xFFFF) {
    throw DimensionError(std::string(what) + ": layer id exceeds u16");
  }
}

}  // namespace detail

/// Bind pct percent of one layer's weights to the given machine: select
/// weights, draw one fresh challenge per weight, XOR each weight's bit
/// pattern with the machine's 32-bit response. Biases and everything outside
/// the selection stay untouched. Deterministic in (model, args, seeds).
inline std::pair<Model, HelperData> encrypt_model(const Model& model,
                                                  int layer_id, double pct,
                                                  const XorArbiterPuf& puf,
                                                  std::uint64_t rng_seed) {
  model.validate();
  detail::check_layer_id(model, layer_id, "encrypt_model");
  const std::vector<std::uint32_t> indices = choose_weights(
      model.layers[layer_id].weight_count(), pct, rng_seed);
  Model encrypted = model;
  SplitMix64 chal_rng(mix64(rng_seed ^ detail::kEncryptChallengeTag));
  HelperData helper =
      detail::encrypt_indices(encrypted, layer_id, indices, puf, chal_rng);
  return {std::move(encrypted), std::move(helper)};
}

/// XOR every helper-listed weight with the local machine's response. On the
/// PUF used at encryption time this restores the original bit patterns
/// exactly; on any other machine it re-randomizes them. Pure in-memory
/// transformation — nothing is written to storage.
inline Model decrypt_model(const Model& model, const HelperData& helper,
                           const XorArbiterPuf& puf) {
  model.validate();
  if (helper.layer_id >= model.layers.size()) {
    throw DimensionError("decrypt_model: helper layer " +
                         std::to_string(helper.layer_id) +
                         " out of range, model has " +
                         std::to_string(model.layers.size()) + " layers");
  }
  Model decrypted = model;
  DenseLayer& layer = decrypted.layers[helper.layer_id];
  for (const HelperEntry& entry : helper.entries) {
    if (entry.flat_index >= layer.weight_count()) {
      throw DimensionError("decrypt_model: weight index " +
                           std::to_string(entry.flat_index) +
                           " out of range, layer has " +
                           std::to_string(layer.weight_count()) + " weights");
    }
    const std::uint32_t key = puf.response32(Challenge{entry.challenge_seed});
    layer.weights[entry.flat_index] = std::bit_cast<float>(encrypt_weight(
        std::bit_cast<std::uint32_t>(layer.weights[entry.flat_index]), key));
  }
  return decrypted;
}

/// Hardware replacement: decrypt under the old machine's PUF and re-encrypt
/// the same weight set with fresh challenges under the new machine's PUF.
inline std::pair<Model, HelperData> rebind(const Model& encrypted,
                                           const HelperData& helper,
                                           const XorArbiterPuf& old_puf,
                                           const XorArbiterPuf& new_puf,
                                           std::uint64_t rng_seed) {
  Model plain = decrypt_model(encrypted, helper, old_puf);
  std::vector<std::uint32_t> indices;
  indices.reserve(helper.entries.size());
  for (const HelperEntry& entry : helper.entries) {
    indices.push_back(entry.flat_index);
  }
  SplitMix64 chal_rng(mix64(rng_seed ^ detail::kRebindChallengeTag));
  HelperData new_helper = detail::encrypt_indices(
      plain, helper.layer_id, indices, new_puf, chal_rng);
  return {std::move(plain), std::move(new_helper)};
}

// NNHD helper file, little-endian:
//   magic "NNHD", version u16 = 1, layer_id u16, entry_count u32,
//   reserved u32 = 0, then entry_count x {flat_index u32, challenge_seed u64}
//   sorted strictly ascending by flat_index. Exactly 16 + 12*N bytes.
inline constexpr char kHelperMagic[4] = {'N', 'N', 'H', 'D'};
inline constexpr std::uint16_t kHelperVersion = 1;

inline void save_helper(const HelperData& helper, const std::string& path) {
  helper.validate();
  if (helper.entries.size() > 0xFFFFFFFFull) {
    throw ConfigError("save_helper: too many entries");
  }
  detail::ByteWriter out;
  out.bytes(reinterpret_cast<const std::uint8_t*>(kHelperMagic), 4);
  out.u16le(kHelperVersion);
  out.u16le(helper.layer_id);
  out.u32le(static_cast<std::uint32_t>(helper.entries.size()));
  out.u32le(0);  // reserved
  for (const HelperEntry& entry : helper.entries) {
    out.u32le(entry.flat_index);
    out.u64le(entry.challenge_seed);
  }
  out.save(path);
}

inline HelperData load_helper(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader in(bytes, "load_helper: " + path);
  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(in.u8());
  if (std::string_view(magic, 4) != std::string_view(kHelperMagic, 4)) {
    throw ParseError("load_helper: " + path +
                     ": bad magic at offset 0: expected \"NNHD\", got \"" +
                     std::string(magic, 4) + "\"");
  }
  const std::uint16_t version = in.u16le();
  if (version != kHelperVersion) {
    throw ParseError("load_helper: " + path + ": unsupported version " +
                     std::to_string(version) + ", expected " +
                     std::to_string(kHelperVersion));
  }
  HelperData helper;
  helper.layer_id = in.u16le();
  const std::uint32_t count = in.u32le();
  const std::uint32_t reserved = in.u32le();
  if (reserved != 0) {
    in.fail("reserved field must be 0, got " + std::to_string(reserved));
  }
  helper.entries.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    helper.entries[i].flat_index = in.u32le();
    helper.entries[i].challenge_seed = in.u64le();
    if (i > 0 &&
        helper.entries[i].flat_index <= helper.entries[i - 1].flat_index) {
      in.fail("entries not strictly ascending at entry " + std::to_string(i));
    }
  }
  in.expect_end();
  return helper;
}

}  // namespace puflock
