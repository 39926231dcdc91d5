#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "puflock/errors.hpp"
#include "puflock/rng.hpp"

namespace puflock {

/// XOR arbiter PUF parameters.
struct PufConfig {
  int n_stages = 64;         ///< arbiter chain length (bits per sub-challenge)
  int k_chains = 4;          ///< number of XORed arbiter chains
  double noise_sigma = 0.0;  ///< per-evaluation Gaussian noise on the delay sum

  void validate() const {
    if (n_stages < 1) throw ConfigError("PufConfig: n_stages must be >= 1");
    if (k_chains < 1) throw ConfigError("PufConfig: k_chains must be >= 1");
    if (!(noise_sigma >= 0.0)) {
      throw ConfigError("PufConfig: noise_sigma must be >= 0");
    }
  }

  bool operator==(const PufConfig&) const = default;
};

/// Compact challenge identifier. A challenge expands deterministically into
/// one n_stages-bit sub-challenge per response bit, so helper data only ever
/// stores the 8-byte seed.
struct Challenge {
  std::uint64_t seed = 0;
};

/// Simulated XOR arbiter PUF under the additive delay model.
///
/// A machine is identified by a 64-bit seed; its fingerprint is k chains of
/// standard-normal delay weights drawn from that seed. One evaluation yields
/// one response bit: the XOR of the k per-chain arbiter bits, where chain t
/// outputs the sign of <w_t, phi(challenge)> with the usual parity feature
/// map phi_j = prod_{l=j}^{n-1} (1 - 2 c_l), phi_n = 1.
///
/// Instances are immutable after construction; with noise_sigma = 0 all
/// evaluations are pure functions of (machine_seed, config, challenge) and
/// safe to run concurrently.
class XorArbiterPuf {
 public:
  /// Simulate the PUF of the machine identified by machine_seed.
  explicit XorArbiterPuf(std::uint64_t machine_seed, PufConfig config = {})
      : config_(config), machine_seed_(machine_seed) {
    config_.validate();
    SplitMix64 rng(machine_seed);
    chain_weights_.resize(static_cast<std::size_t>(config_.k_chains) *
                          (config_.n_stages + 1));
    for (double& w : chain_weights_) w = rng.next_normal();
  }

  /// Build a PUF with explicit chain weights, laid out chain-major with
  /// n_stages + 1 entries per chain (last entry is the bias weight).
  XorArbiterPuf(PufConfig config, std::vector<double> chain_weights,
                std::uint64_t machine_seed = 0)
      : config_(config),
        machine_seed_(machine_seed),
        chain_weights_(std::move(chain_weights)) {
    config_.validate();
    const std::size_t expected =
        static_cast<std::size_t>(config_.k_chains) * (config_.n_stages + 1);
    if (chain_weights_.size() != expected) {
      throw DimensionError("XorArbiterPuf: expected " +
                           std::to_string(expected) + " chain weights, got " +
                           std::to_string(chain_weights_.size()));
    }
  }

  const PufConfig& config() const { return config_; }
  std::uint64_t machine_seed() const { return machine_seed_; }
  std::span<const double> chain_weights() const { return chain_weights_; }

  /// Weights of one chain (n_stages + 1 values).
  std::span<const double> chain(int t) const {
    return std::span<const double>(chain_weights_)
        .subspan(static_cast<std::size_t>(t) * (config_.n_stages + 1),
                 config_.n_stages + 1);
  }

  /// One arbiter evaluation. challenge_bits must hold exactly n_stages
  /// entries in {0, 1}. sign(0) counts as +1.
  int eval_bit(std::span<const std::uint8_t> challenge_bits) const {
    const int n = config_.n_stages;
    if (static_cast<int>(challenge_bits.size()) != n) {
      throw DimensionError("eval_bit: challenge has " +
                           std::to_string(challenge_bits.size()) +
                           " bits, PUF has " + std::to_string(n) + " stages");
    }
    int parity = 0;
    for (int t = 0; t < config_.k_chains; ++t) {
      const double* w = chain_weights_.data() +
                        static_cast<std::size_t>(t) * (n + 1);
      double acc = w[n];  // phi_n = 1
      double phi = 1.0;
      for (int j = n - 1; j >= 0; --j) {
        phi = challenge_bits[j] ? -phi : phi;
        acc += w[j] * phi;
      }
      if (config_.noise_sigma > 0.0) {
        acc += config_.noise_sigma * noise_rng().next_normal();
      }
      if (acc < 0.0) parity ^= 1;
    }
    return parity;
  }

  /// Sub-challenge index i of a stored challenge: the low n_stages bits of
  /// mix64(seed + i * kGolden64), LSB first. Bits beyond 64 are zero.
  std::vector<std::uint8_t> sub_challenge(Challenge c,
                                          std::uint64_t index) const {
    std::vector<std::uint8_t> bits(config_.n_stages);
    fill_sub_challenge(c, index, bits);
    return bits;
  }

  /// m-bit response assembled from m single-bit evaluations.
  std::vector<std::uint8_t> response(Challenge c, int m) const {
    if (m < 1) throw ConfigError("response: m must be >= 1");
    std::vector<std::uint8_t> bits(m);
    std::vector<std::uint8_t> sub(config_.n_stages);
    for (int i = 0; i < m; ++i) {
      fill_sub_challenge(c, static_cast<std::uint64_t>(i), sub);
      bits[i] = static_cast<std::uint8_t>(eval_bit(sub));
    }
    return bits;
  }

  /// 32-bit response packed LSB-first; the per-weight cipher key.
  std::uint32_t response32(Challenge c) const {
    std::uint32_t r = 0;
    std::vector<std::uint8_t> sub(config_.n_stages);
    for (int i = 0; i < 32; ++i) {
      fill_sub_challenge(c, static_cast<std::uint64_t>(i), sub);
      r |= static_cast<std::uint32_t>(eval_bit(sub)) << i;
    }
    return r;
  }

 private:
  void fill_sub_challenge(Challenge c, std::uint64_t index,
                          std::span<std::uint8_t> bits) const {
    const std::uint64_t v = mix64(c.seed + index * kGolden64);
    const int n = config_.n_stages;
    const int usable = n < 64 ? n : 64;
    for (int j = 0; j < usable; ++j) {
      bits[j] = static_cast<std::uint8_t>((v >> j) & 1);
    }
    for (int j = usable; j < n; ++j) bits[j] = 0;
  }

  // Noise draws are not part of the determinism contract; one stream per
  // thread keeps concurrent noisy evaluations race-free.
  static SplitMix64& noise_rng() {
    thread_local SplitMix64 rng{
        (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^
        std::random_device{}()};
    return rng;
  }

  PufConfig config_;
  std::uint64_t machine_seed_ = 0;
  std::vector<double> chain_weights_;
};

/// Mean Hamming-distance fraction between the 32-bit responses of two
/// machines over num_challenges seeded random challenges.
inline double uniqueness(std::uint64_t seed_a, std::uint64_t seed_b,
                         const PufConfig& config, int num_challenges,
                         std::uint64_t rng_seed) {
  if (num_challenges < 1) {
    throw ConfigError("uniqueness: num_challenges must be >= 1");
  }
  const XorArbiterPuf a(seed_a, config);
  const XorArbiterPuf b(seed_b, config);
  SplitMix64 rng(rng_seed);
  std::int64_t differing = 0;
  for (int i = 0; i < num_challenges; ++i) {
    const Challenge c{rng.next()};
    differing += std::popcount(a.response32(c) ^ b.response32(c));
  }
  return static_cast<double>(differing) / (32.0 * num_challenges);
}

/// Fraction of 1-bits in num_challenges 32-bit responses of one machine.
inline double bit_balance(const XorArbiterPuf& puf, int num_challenges,
                          std::uint64_t rng_seed) {
  if (num_challenges < 1) {
    throw ConfigError("bit_balance: num_challenges must be >= 1");
  }
  SplitMix64 rng(rng_seed);
  std::int64_t ones = 0;
  for (int i = 0; i < num_challenges; ++i) {
    ones += std::popcount(puf.response32(Challenge{rng.next()}));
  }
  return static_cast<double>(ones) / (32.0 * num_challenges);
}

}  // namespace puflock
