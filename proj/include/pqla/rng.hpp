#pragma once

#include <cstdint>
#include <random>

namespace pqla {

using Engine = std::mt19937_64;

/// Stream tags used when deriving sub-seeds from a master seed.  A given
/// (master, stream, index) triple always maps to the same engine state.
enum class Stream : std::uint64_t {
  kEnvironment = 1,
  kFast = 2,
  kNoise = 3,
  kPsi = 4,
  kReplication = 5,
  kStateNoise = 6,
  kLimitField = 7,
  kRosenthal = 8,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0);

Engine make_engine(std::uint64_t seed);

}  // namespace pqla
