#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace nerula {

/// Counter-based generator: draw n is splitmix64(seed + (n + 1) * golden_gamma).
///
/// The stream is a pure function of (seed, counter), so the sequence is identical
/// on every platform and child streams can be split off without shared state.
class RngStream {
public:
    static constexpr std::string_view algorithm = "splitmix64-counter";

    explicit RngStream(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi], inclusive, without modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Standard normal via Box-Muller (no cached spare, so draws stay counter-addressable).
    double normal() noexcept;
    double normal(double mean, double sigma) noexcept { return mean + sigma * normal(); }
    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Independent child stream keyed by an integer.
    RngStream split(std::uint64_t key) const noexcept;
    /// Independent child stream keyed by a string (FNV-1a of the bytes).
    RngStream split(std::string_view key) const noexcept;

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace nerula
