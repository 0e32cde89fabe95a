#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "tecfap/text.hpp"

namespace tecfap {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Mixes a base seed with identifying parts so that independent draws (per
// probe, per entry) never share a stream and never depend on call order.
template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t seed, const Parts&... parts) {
    std::uint64_t h = splitmix64(seed);
    auto mix = [&h](const auto& part) {
        using T = std::decay_t<decltype(part)>;
        if constexpr (std::is_convertible_v<T, std::string_view>) {
            h = splitmix64(h ^ fnv1a64(std::string_view(part)));
        } else {
            h = splitmix64(h ^ static_cast<std::uint64_t>(part));
        }
    };
    (mix(parts), ...);
    return h;
}

/// Seeded generator whose outputs are identical across standard libraries.
/// std::uniform_*_distribution and std::shuffle are implementation-defined,
/// so bounded draws and shuffles are done here on top of mt19937_64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    // Uniform double in [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
        }
    }

    // k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k && i < n; ++i) {
            std::swap(idx[i], idx[i + static_cast<std::size_t>(below(n - i))]);
        }
        idx.resize(k < n ? k : n);
        return idx;
    }

private:
    std::mt19937_64 engine_;
};

inline double unit_hash(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

}  // namespace tecfap
