#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace placelab {

// splitmix64 finalizer; used for deriving independent child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_bytes(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    // FNV-1a over the bytes, folded through mix64 by callers as needed.
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Seed derivation for independent streams: fold each component into the state.
// Both overloads are declared up front so each can recurse into the other
// regardless of how integer and string components interleave.
inline std::uint64_t derive_seed(std::uint64_t base) { return mix64(base); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t next, Rest... rest);
template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::string_view next, Rest... rest);

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t next, Rest... rest) {
    return derive_seed(mix64(base ^ mix64(next)), rest...);
}

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::string_view next, Rest... rest) {
    return derive_seed(mix64(base ^ hash_bytes(next)), rest...);
}

// mt19937_64 with hand-pinned real distributions so that streams are
// reproducible across standard libraries (std::uniform_real_distribution is
// not guaranteed to produce identical sequences everywhere).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [lo, hi] via rejection-free Lemire-style reduction is
    // overkill here; modulo bias is negligible for our ranges but we avoid it
    // anyway by rejection sampling.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % span + 1) % span;
        std::uint64_t x = engine_();
        while (x > limit) x = engine_();
        return lo + static_cast<std::int64_t>(x % span);
    }

    // Log-uniform over [lo, hi], both > 0.
    double log_uniform(double lo, double hi) {
        if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_uniform: bad range");
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Sample an index from a normalized probability vector. The trailing
    // index absorbs any floating-point residue.
    int categorical(const std::vector<double>& probs) {
        if (probs.empty()) throw std::invalid_argument("categorical: empty");
        const double u = uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size() - 1);
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace placelab
