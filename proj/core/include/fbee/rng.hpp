#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace fbee {

using Rng = std::mt19937_64;

/// Derives an independent generator for a named stream from the master seed.
///
/// The derivation is fixed: the stream name is hashed with 64-bit FNV-1a and
/// the generator is seeded through std::seed_seq with the 32-bit halves of
/// (master_seed, hash). Every random draw in a run flows from one of these
/// streams, so a run is a pure function of its configuration.
Rng derive_rng(std::uint64_t master_seed, std::string_view stream);

std::uint64_t fnv1a64(std::string_view text);

/// Text form of the generator state (the standard stream representation).
std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& state);

}  // namespace fbee
