#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nerula/autodiff.hpp"

namespace nerula {

// Differentiable operations. Every op validates shapes and throws ShapeError
// with both operand shapes on mismatch. Layout conventions: sequence features
// are [T x D] (time-major rows); convolution feature maps are [C x T].

// Elementwise (identical shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var gelu(const Var& x);

/// x[R x C] + b[C], broadcast over rows.
Var add_bias_rows(const Var& x, const Var& b);
/// x[C x T] + b[C], broadcast over time.
Var add_bias_channels(const Var& x, const Var& b);

/// x[T x D] scaled per row by the constant m[T].
Var mask_rows(const Var& x, const Array& m);
/// x[C x T] scaled per time step by the constant m[T].
Var mask_channels(const Var& x, const Array& m);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
/// Stacks k arrays of identical shape [n] into [k x n].
Var stack_rows(std::span<const Var> rows);

Var sum(const Var& a);
Var mean(const Var& a);
Var softmax_rows(const Var& a);

/// Cross-correlation of input[C_in x T] with kernel[C_out x C_in x K].
/// Output length floor((T + 2 padding - K) / stride) + 1.
Var conv1d(const Var& input, const Var& kernel, std::size_t stride, std::size_t padding);

/// Adjoint of conv1d: input[C_in x T], kernel[C_in x C_out x K].
/// Output length (T - 1) stride - 2 padding + K.
Var conv_transpose1d(const Var& input, const Var& kernel, std::size_t stride, std::size_t padding);

/// Single-head attention where row t only attends to rows within +-window/2.
/// q, k, v are [T x D]; window must be odd. Cost is O(T * window * D).
Var local_attention(const Var& q, const Var& k, const Var& v, std::size_t window);

/// Row-wise normalization of x[T x D] with affine gain[D], bias[D].
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// sum_t x[t] * m[t] / max(sum_t m[t], eps) for x[T x D], constant m[T]; result [D].
Var masked_mean_rows(const Var& x, const Array& m, double eps = 1e-8);

/// x[N x in] W[in x out] + b[out].
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Linear resampling of m to target_len using the sample-center convention:
/// output[i] interpolates m at position (i + 0.5) * T / target_len - 0.5, clamped
/// to the ends. Linear in m; identity when target_len == T.
Array interpolate_linear(std::span<const double> m, std::size_t target_len);

}  // namespace nerula
