#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace lookahead {

// xoshiro256** seeded through splitmix64. Self-contained so that streams are
// reproducible across standard libraries and platforms; std::uniform_*
// distributions are implementation-defined and must not be used anywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, bound) without modulo bias.
    std::uint64_t uniform_u64(std::uint64_t bound);

    // Uniform in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Uniform in [0, 1) with 53 random bits.
    double uniform_real();

    bool bernoulli(double p);

    // Standard normal via Box-Muller with a cached spare.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_u64(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Named sub-stream derivation: all randomness in a run flows from one master
// seed through streams like "data", "augment", "init", "shuffle", "decode".
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

// Per-item stream, e.g. one RNG per dataset example so parallel and serial
// builds produce identical output.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// FNV-1a over bytes; also used for content-addressing pipeline stages.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

} // namespace lookahead
