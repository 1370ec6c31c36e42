#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nerula/params.hpp"

namespace nerula {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::uint64_t step = 0;
    std::vector<Array> first_moment;
    std::vector<Array> second_moment;
};

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update using the gradients stored on `params`.
/// Moments are lazily sized on the first call. If any gradient element is not
/// finite the whole step is rejected (nothing is modified) and NonFiniteError
/// names the offending parameter.
void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& cfg);

}  // namespace nerula
