#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nerula/params.hpp"

namespace nerula {

struct FdReport {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;    // index of the input (or parameter) holding the worst element
    std::size_t worst_element = 0;  // flat index within that input
    double analytic = 0.0;          // gradient values at the worst element
    double numeric = 0.0;
    std::size_t checked = 0;  // number of elements compared
};

struct FdOptions {
    double eps = 1e-5;
    /// Denominator floor: err = |a - n| / max(|a|, |n|, floor). Elements whose
    /// gradient is far below the floor are judged on absolute error.
    double floor = 1e-3;
    /// Seed for the random projection that reduces the op output to a scalar.
    std::uint64_t projection_seed = 0x5eed;
    /// When nonzero, only this many elements per input (evenly strided) are probed.
    std::size_t max_elements_per_input = 0;
};

using DiffOp = std::function<Var(std::span<const Var>)>;

/// Compares reverse-mode gradients of s = sum(r * op(inputs)), r a fixed random
/// projection, against central differences at every input element.
FdReport fd_check(const DiffOp& op, std::span<const Array> inputs, const FdOptions& opts = {});

/// Same comparison for a scalar loss built from the trainable leaves of `params`.
/// Values are perturbed in place and restored.
FdReport fd_check_params(const std::function<Var()>& loss, ParameterSet& params, const FdOptions& opts = {});

}  // namespace nerula
