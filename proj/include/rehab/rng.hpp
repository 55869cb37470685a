#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace rehab {

// The standard distributions are implementation-defined, so sampling is done
// here on top of the (fully specified) mt19937_64 engine. This keeps seeded
// runs bit-identical across standard libraries.

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed) noexcept { return seed; }

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view part) noexcept {
    return splitmix64(seed ^ splitmix64(fnv1a(part)));
}

template <typename Int>
    requires std::is_integral_v<Int>
std::uint64_t mix_seed(std::uint64_t seed, Int part) noexcept {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(part) + 0x632be59bd9b4e019ULL));
}

/// Derives a child seed from a base seed and a list of coordinates
/// (integers or strings). Order matters.
template <typename First, typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, First&& first, Rest&&... rest) noexcept {
    const std::uint64_t s = mix_seed(base, std::forward<First>(first));
    if constexpr (sizeof...(rest) == 0) {
        return s;
    } else {
        return derive_seed(s, std::forward<Rest>(rest)...);
    }
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's nearly-divisionless rejection method.
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    template <typename Container>
    void shuffle(Container& c) {
        shuffle(std::span{c.data(), c.size()});
    }

private:
    std::mt19937_64 engine_;
};

} // namespace rehab
