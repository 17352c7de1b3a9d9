#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace rangeforge {

/// 64-bit FNV-1a over a label, chainable via the basis argument. Used to
/// derive rng substream keys from string paths.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t basis = 0xcbf29ce484222325ull) {
    std::uint64_t h = basis;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic random stream (SplitMix64 core). Substreams are derived by
/// label, so any draw is a pure function of (root seed, label path, draw
/// index) and never depends on draw order elsewhere in the program. That is
/// the property the record-and-replay contract leans on.
///
/// Distributions are implemented here rather than with <random> because the
/// standard leaves distribution output unspecified across implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Child stream keyed by this stream's seed and a label.
    Rng substream(std::string_view label) const {
        std::uint64_t s = fnv1a64(label, state_ ^ 0x9e3779b97f4a7c15ull);
        return Rng(splitmix64(s));
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Unbiased draw in [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        unsigned __int128 m =
            static_cast<unsigned __int128>(next_u64()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = -bound % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Inclusive uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(below(span));
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(v[i - 1], v[j]);
        }
    }

    /// First k elements of a seeded permutation of [0, n): sampling without
    /// replacement via partial Fisher-Yates.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        if (k > n) k = n;
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = i + static_cast<std::size_t>(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    std::uint64_t state_;
};

/// Stable [0,1) value keyed purely by strings; no stream state involved.
/// Used for set-membership style draws that must not depend on any seed
/// (e.g. a detector's fixed signature knowledge of a digest).
inline double keyed_unit(std::string_view key, std::string_view salt) {
    std::uint64_t h = fnv1a64(key, fnv1a64(salt));
    return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

}  // namespace rangeforge
