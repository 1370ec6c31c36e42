#include "nerula/masking.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "nerula/ops.hpp"

namespace nerula {

std::size_t MaskSpec::kept() const noexcept {
    std::size_t n = 0;
    for (auto b : bits) {
        n += b;
    }
    return n;
}

Array MaskSpec::as_array() const {
    Array a({bits.size()});
    for (std::size_t i = 0; i < bits.size(); ++i) {
        a[i] = bits[i];
    }
    return a;
}

MaskSpec MaskSpec::complement() const {
    MaskSpec c;
    c.seed = seed;
    c.bits.resize(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        c.bits[i] = static_cast<std::uint8_t>(1 - bits[i]);
    }
    c.patch_count = count_zero_runs(c.bits);
    return c;
}

std::size_t count_zero_runs(std::span<const std::uint8_t> bits) {
    std::size_t runs = 0;
    bool in_run = false;
    for (auto b : bits) {
        if (b == 0 && !in_run) {
            ++runs;
        }
        in_run = (b == 0);
    }
    return runs;
}

std::vector<std::pair<std::size_t, std::size_t>> zero_runs(std::span<const std::uint8_t> bits) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t i = 0; i < bits.size();) {
        if (bits[i] != 0) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < bits.size() && bits[i] == 0) {
            ++i;
        }
        runs.emplace_back(start, i);
    }
    return runs;
}

namespace {

// Uniform random composition of `total` into `parts` positive integers:
// choose parts-1 distinct cut points in {1..total-1} (Floyd's algorithm).
std::vector<std::size_t> random_composition(std::size_t total, std::size_t parts, RngStream& rng) {
    std::set<std::int64_t> cuts;
    const auto n = static_cast<std::int64_t>(total) - 1;
    const auto m = static_cast<std::int64_t>(parts) - 1;
    for (std::int64_t j = n - m + 1; j <= n; ++j) {
        const std::int64_t t = rng.uniform_int(1, j);
        if (!cuts.insert(t).second) {
            cuts.insert(j);
        }
    }
    std::vector<std::size_t> out;
    std::int64_t prev = 0;
    for (auto c : cuts) {
        out.push_back(static_cast<std::size_t>(c - prev));
        prev = c;
    }
    out.push_back(static_cast<std::size_t>(static_cast<std::int64_t>(total) - prev));
    return out;
}

}  // namespace

MaskSpec sample_patch_mask(std::size_t length, RngStream& rng) {
    if (length % 2 != 0) {
        throw std::invalid_argument("sample_patch_mask: length " + std::to_string(length) +
                                    " is odd; an exact 50% mask needs an even length");
    }
    if (length < kMinPatchMaskLength) {
        throw std::invalid_argument("sample_patch_mask: length " + std::to_string(length) + " is below " +
                                    std::to_string(kMinPatchMaskLength) +
                                    ", too short for 15-30 separated patches");
    }
    MaskSpec mask;
    mask.seed = rng.seed();
    const std::size_t budget = length / 2;
    const std::size_t kept = length - budget;
    const auto patches = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(kMinPatches), static_cast<std::int64_t>(kMaxPatches)));

    const std::vector<std::size_t> lengths = random_composition(budget, patches, rng);
    // Gaps around the patches: the two outer gaps may be empty, inner gaps may not.
    std::vector<std::size_t> gaps = random_composition(kept + 2, patches + 1, rng);
    gaps.front() -= 1;
    gaps.back() -= 1;

    mask.bits.assign(length, 1);
    std::size_t pos = gaps[0];
    for (std::size_t k = 0; k < patches; ++k) {
        std::fill_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(pos), lengths[k], std::uint8_t{0});
        pos += lengths[k] + gaps[k + 1];
    }
    mask.patch_count = patches;
    return mask;
}

MaskSpec sample_random_point_mask(std::size_t length, RngStream& rng) {
    if (length % 2 != 0) {
        throw std::invalid_argument("sample_random_point_mask: length " + std::to_string(length) + " is odd");
    }
    std::vector<std::size_t> idx(length);
    for (std::size_t i = 0; i < length; ++i) {
        idx[i] = i;
    }
    MaskSpec mask;
    mask.seed = rng.seed();
    mask.bits.assign(length, 1);
    const std::size_t masked = length / 2;
    for (std::size_t i = 0; i < masked; ++i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(length) - 1));
        std::swap(idx[i], idx[j]);
        mask.bits[idx[i]] = 0;
    }
    mask.patch_count = count_zero_runs(mask.bits);
    return mask;
}

MaskPair make_mask_pair(MaskSpec primary) {
    MaskPair pair;
    pair.complement = primary.complement();
    pair.primary = std::move(primary);
    return pair;
}

std::pair<std::vector<double>, std::vector<double>> make_pair(std::span<const double> x, const MaskSpec& mask) {
    if (x.size() != mask.length()) {
        throw std::invalid_argument("make_pair: signal length " + std::to_string(x.size()) +
                                    " != mask length " + std::to_string(mask.length()));
    }
    std::vector<double> xi(x.size());
    std::vector<double> xj(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        xi[t] = mask.bits[t] ? x[t] : 0.0;
        xj[t] = mask.bits[t] ? 0.0 : x[t];
    }
    return {std::move(xi), std::move(xj)};
}

std::pair<Signal, Signal> make_pair(const Signal& x, const MaskSpec& mask) {
    auto [xi, xj] = make_pair(std::span<const double>(x.samples), mask);
    Signal a = x;
    Signal b = x;
    a.samples = std::move(xi);
    b.samples = std::move(xj);
    a.id += "/m";
    b.id += "/1-m";
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

std::string_view to_string(PairVariant v) {
    switch (v) {
        case PairVariant::nerula_mask:
            return "nerula_mask";
        case PairVariant::random_point_mask:
            return "random_point_mask";
        case PairVariant::byol_augment:
            return "byol_augment";
        case PairVariant::clocs_segments:
            return "clocs_segments";
    }
    return "?";
}

PairVariant parse_pair_variant(std::string_view name) {
    if (name == "nerula_mask" || name == "nerula") {
        return PairVariant::nerula_mask;
    }
    if (name == "random_point_mask" || name == "random_point") {
        return PairVariant::random_point_mask;
    }
    if (name == "byol_augment" || name == "byol") {
        return PairVariant::byol_augment;
    }
    if (name == "clocs_segments" || name == "clocs") {
        return PairVariant::clocs_segments;
    }
    throw std::invalid_argument("unknown pair strategy '" + std::string(name) + "'");
}

void PairStrategy::validate() const {
    if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) {
        throw std::invalid_argument("crop_fraction must lie in (0, 1]");
    }
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
        throw std::invalid_argument("flip_prob must lie in [0, 1]");
    }
    if (!(noise_frac >= 0.0) || !std::isfinite(noise_frac)) {
        throw std::invalid_argument("noise_frac must be finite and >= 0");
    }
}

namespace {

double stddev(std::span<const double> x) {
    double mu = 0.0;
    for (double v : x) {
        mu += v;
    }
    mu /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) {
        var += (v - mu) * (v - mu);
    }
    return std::sqrt(var / static_cast<double>(x.size()));
}

std::vector<double> byol_view(const PairStrategy& s, std::span<const double> x, double sigma, RngStream& rng) {
    const std::size_t len = x.size();
    const auto crop = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(s.crop_fraction * static_cast<double>(len))), 1, len);
    const auto start =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(len - crop)));
    Array resized = interpolate_linear(x.subspan(start, crop), len);
    std::vector<double> v = std::move(resized.values());
    if (rng.bernoulli(s.flip_prob)) {
        std::reverse(v.begin(), v.end());
    }
    if (rng.bernoulli(s.flip_prob)) {
        for (auto& e : v) {
            e = -e;
        }
    }
    if (sigma > 0.0) {
        for (auto& e : v) {
            e += sigma * rng.normal();
        }
    }
    return v;
}

}  // namespace

ViewPair generate_views(const PairStrategy& strategy, std::span<const double> x, RngStream& rng) {
    strategy.validate();
    if (x.empty()) {
        throw std::invalid_argument("generate_views: empty signal");
    }
    const std::size_t len = x.size();
    ViewPair views;
    switch (strategy.variant) {
        case PairVariant::nerula_mask:
        case PairVariant::random_point_mask: {
            const MaskSpec m = strategy.variant == PairVariant::nerula_mask ? sample_patch_mask(len, rng)
                                                                            : sample_random_point_mask(len, rng);
            auto [xi, xj] = make_pair(x, m);
            views.first = std::move(xi);
            views.second = std::move(xj);
            views.first_mask.resize(len);
            views.second_mask.resize(len);
            for (std::size_t t = 0; t < len; ++t) {
                views.first_mask[t] = m.bits[t];
                views.second_mask[t] = 1.0 - m.bits[t];
            }
            return views;
        }
        case PairVariant::byol_augment: {
            const double sigma = strategy.noise_frac * stddev(x);
            views.first = byol_view(strategy, x, sigma, rng);
            views.second = byol_view(strategy, x, sigma, rng);
            break;
        }
        case PairVariant::clocs_segments: {
            const std::size_t half = len / 2;
            views.first.assign(len, 0.0);
            views.second.assign(len, 0.0);
            std::copy_n(x.begin(), half, views.first.begin());
            std::copy(x.begin() + static_cast<std::ptrdiff_t>(half), x.end(), views.second.begin());
            break;
        }
    }
    views.first_mask.assign(len, 1.0);
    views.second_mask.assign(len, 1.0);
    return views;
}

}  // namespace nerula
