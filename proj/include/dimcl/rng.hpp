#ifndef DIMCL_RNG_HPP
#define DIMCL_RNG_HPP

#include <cstdint>
#include <vector>

namespace dimcl {

// Counter-based generator. Output i is a hash of (key, i), so identical
// seed plus identical call sequence gives bitwise-identical draws, and
// split() derives an independent stream without touching this one.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Independent child stream labelled by `stream`.
    Rng split(std::uint64_t stream) const;

    std::uint64_t next_u64();
    double uniform();                     // [0, 1)
    double uniform(double lo, double hi); // [lo, hi)
    double normal();                      // standard normal (Box-Muller)
    std::uint64_t uniform_int(std::uint64_t n); // [0, n)
    std::vector<std::size_t> permutation(std::size_t n);

    std::uint64_t key() const { return key_; }

private:
    Rng(std::uint64_t key, int) : key_(key) {}
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace dimcl

#endif
