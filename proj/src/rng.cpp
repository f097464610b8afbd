#include "dimcl/rng.hpp"

#include <cmath>
#include <numbers>

namespace dimcl {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27; x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

std::uint64_t hash_pair(std::uint64_t key, std::uint64_t ctr) {
    return mix(key + ctr * kGolden);
}
} // namespace

Rng::Rng(std::uint64_t seed) : key_(mix(seed ^ kGolden)) {}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(hash_pair(key_ ^ 0xA5A5A5A5A5A5A5A5ull, stream + 1), 0);
}

std::uint64_t Rng::next_u64() {
    return hash_pair(key_, ++counter_);
}

double Rng::uniform() {
    // top 53 bits -> [0,1)
    return (double)(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    // rejection sampling to avoid modulo bias
    if (n == 0) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do { x = next_u64(); } while (x >= limit);
    return x % n;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = (std::size_t)uniform_int(i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

} // namespace dimcl
