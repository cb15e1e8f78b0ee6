#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

#include "mhsic/types.hpp"

namespace mhsic {

/// 64-bit FNV-1a, used to turn stream names into seed tags at compile time.
constexpr std::uint64_t stream_tag(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// SplitMix64 finaliser; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a path of tags.
/// Platform-stable: depends only on integer arithmetic.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Seeded generator with hand-written variate transforms.
///
/// std::mt19937_64 is fully specified by the standard, but the std::*_distribution
/// adaptors are not, so every variate is produced here from raw 64-bit draws to
/// keep samples bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, bound); unbiased (Lemire's method).
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal via the Marsaglia polar method.
    double normal();

    /// Exponential with unit rate.
    double exponential();

    /// Laplace with unit variance (scale 1/sqrt(2)).
    double laplace_unit();

    /// Uniform with unit variance, i.e. Uniform(-sqrt(3), sqrt(3)).
    double uniform_unit();

    /// Fisher-Yates shuffle of an index array.
    void shuffle(std::span<Index> values);

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mhsic
