#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nerula/gradcheck.hpp"
#include "nerula/model.hpp"

namespace nerula {

struct GradCheckCase {
    std::string name;
    FdReport report;
    bool passed = false;
};

/// Small model used by the end-to-end gradient check: T = 64, D = 8, one
/// attention block, one decoder block.
EncoderConfig tiny_encoder_config();
inline constexpr std::size_t kTinySignalLength = 64;

/// Central-difference check of every differentiable op on random inputs drawn
/// from `seed`, followed by the combined loss of a two-example batch through
/// encode, project and decode on the tiny config.
std::vector<GradCheckCase> run_gradient_suite(std::uint64_t seed, const FdOptions& opts = {},
                                              double tolerance = 1e-5);

/// Only the end-to-end case of the suite.
GradCheckCase check_end_to_end(std::uint64_t seed, const FdOptions& opts = {}, double tolerance = 1e-5);

}  // namespace nerula
