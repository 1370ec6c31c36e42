#include "nerula/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nerula {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t RngStream::next_u64() noexcept {
    ++counter_;
    return splitmix64(seed_ + counter_ * kGoldenGamma);
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) {
        throw std::invalid_argument("uniform_int: empty range");
    }
    const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) {
        return static_cast<std::int64_t>(next_u64());
    }
    // Rejection on the top of the 64-bit range keeps every residue equally likely.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return lo + static_cast<std::int64_t>(x % range);
}

double RngStream::normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::split(std::uint64_t key) const noexcept {
    return RngStream(splitmix64(seed_ ^ splitmix64(key + kGoldenGamma)));
}

RngStream RngStream::split(std::string_view key) const noexcept { return split(fnv1a64(key)); }

}  // namespace nerula
