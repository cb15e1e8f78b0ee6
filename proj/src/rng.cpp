#include "mhsic/rng.hpp"

#include <cmath>
#include <utility>

namespace mhsic {

namespace {
__extension__ using u128 = unsigned __int128;
}  // namespace

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t tag : path) {
        h = mix64(h ^ mix64(tag + 0x632be59bd9b4e019ULL));
    }
    return h;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    u128 product = static_cast<u128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(product);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            product = static_cast<u128>(engine_()) * bound;
            low = static_cast<std::uint64_t>(product);
        }
    }
    return static_cast<std::uint64_t>(product >> 64);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * factor;
    has_spare_ = true;
    return u * factor;
}

double Rng::exponential() {
    // 1 - U lies in (0, 1], so the log is finite.
    return -std::log(1.0 - uniform01());
}

double Rng::laplace_unit() {
    const double magnitude = exponential() / std::sqrt(2.0);
    return (engine_() >> 63) ? magnitude : -magnitude;
}

double Rng::uniform_unit() {
    const double half_width = std::sqrt(3.0);
    return uniform(-half_width, half_width);
}

void Rng::shuffle(std::span<Index> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(below(i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace mhsic
