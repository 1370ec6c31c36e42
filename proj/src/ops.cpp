#include "nerula/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace nerula {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

MapMat as_mat(Array& a, std::size_t rows, std::size_t cols) {
    return MapMat(a.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
CMapMat as_mat(const Array& a, std::size_t rows, std::size_t cols) {
    return CMapMat(a.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_fail(const char* op, const std::string& what) {
    throw ShapeError(std::string(op) + ": " + what);
}

void require_same(const char* op, const Var& a, const Var& b) {
    if (a.shape() != b.shape()) {
        shape_fail(op, "operand shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
    }
}

void require_rank(const char* op, const char* name, const Var& a, std::size_t rank) {
    if (a.value().rank() != rank) {
        shape_fail(op, std::string(name) + " must be rank " + std::to_string(rank) + ", got " +
                           to_string(a.shape()));
    }
}

// Adds `delta` into the gradient of parent `i` if it participates in backward.
template <class F>
void accumulate(Node& self, std::size_t i, F&& f) {
    Var& p = self.parents[i];
    if (p.requires_grad()) {
        f(p.mutable_grad());
    }
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same("add", a, b);
    Array out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += b.value()[i];
    }
    return Var::from_op(std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            accumulate(self, k, [&](Array& g) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i];
                }
            });
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same("sub", a, b);
    Array out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= b.value()[i];
    }
    return Var::from_op(std::move(out), {a, b}, [](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        });
        accumulate(self, 1, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] -= self.grad[i];
            }
        });
    });
}

Var mul(const Var& a, const Var& b) {
    require_same("mul", a, b);
    Array out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= b.value()[i];
    }
    return Var::from_op(std::move(out), {a, b}, [](Node& self) {
        const Array& av = self.parents[0].value();
        const Array& bv = self.parents[1].value();
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * bv[i];
            }
        });
        accumulate(self, 1, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * av[i];
            }
        });
    });
}

Var scale(const Var& a, double c) {
    Array out = a.value();
    for (auto& v : out.values()) {
        v *= c;
    }
    return Var::from_op(std::move(out), {a}, [c](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += c * self.grad[i];
            }
        });
    });
}

Var gelu(const Var& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    Array out = x.value();
    for (auto& v : out.values()) {
        v = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    return Var::from_op(std::move(out), {x}, [](Node& self) {
        const Array& xv = self.parents[0].value();
        accumulate(self, 0, [&](Array& g) {
            const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double z = xv[i];
                const double cdf = 0.5 * (1.0 + std::erf(z * inv_sqrt2));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * z * z);
                g[i] += self.grad[i] * (cdf + z * pdf);
            }
        });
    });
}

Var add_bias_rows(const Var& x, const Var& b) {
    require_rank("add_bias_rows", "x", x, 2);
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    if (b.shape() != Shape{cols}) {
        shape_fail("add_bias_rows", "bias " + to_string(b.shape()) + " does not match x " + to_string(x.shape()));
    }
    Array out = x.value();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) += b.value()[c];
        }
    }
    return Var::from_op(std::move(out), {x, b}, [rows, cols](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        });
        accumulate(self, 1, [&](Array& g) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    g[c] += self.grad(r, c);
                }
            }
        });
    });
}

Var add_bias_channels(const Var& x, const Var& b) {
    require_rank("add_bias_channels", "x", x, 2);
    const std::size_t chans = x.shape()[0];
    const std::size_t len = x.shape()[1];
    if (b.shape() != Shape{chans}) {
        shape_fail("add_bias_channels",
                   "bias " + to_string(b.shape()) + " does not match x " + to_string(x.shape()));
    }
    Array out = x.value();
    for (std::size_t c = 0; c < chans; ++c) {
        for (std::size_t t = 0; t < len; ++t) {
            out(c, t) += b.value()[c];
        }
    }
    return Var::from_op(std::move(out), {x, b}, [chans, len](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        });
        accumulate(self, 1, [&](Array& g) {
            for (std::size_t c = 0; c < chans; ++c) {
                double s = 0.0;
                for (std::size_t t = 0; t < len; ++t) {
                    s += self.grad(c, t);
                }
                g[c] += s;
            }
        });
    });
}

Var mask_rows(const Var& x, const Array& m) {
    require_rank("mask_rows", "x", x, 2);
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    if (m.shape() != Shape{rows}) {
        shape_fail("mask_rows", "mask " + to_string(m.shape()) + " does not match x " + to_string(x.shape()));
    }
    Array out = x.value();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) *= m[r];
        }
    }
    return Var::from_op(std::move(out), {x}, [m, rows, cols](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    g(r, c) += self.grad(r, c) * m[r];
                }
            }
        });
    });
}

Var mask_channels(const Var& x, const Array& m) {
    require_rank("mask_channels", "x", x, 2);
    const std::size_t chans = x.shape()[0];
    const std::size_t len = x.shape()[1];
    if (m.shape() != Shape{len}) {
        shape_fail("mask_channels",
                   "mask " + to_string(m.shape()) + " does not match x " + to_string(x.shape()));
    }
    Array out = x.value();
    for (std::size_t c = 0; c < chans; ++c) {
        for (std::size_t t = 0; t < len; ++t) {
            out(c, t) *= m[t];
        }
    }
    return Var::from_op(std::move(out), {x}, [m, chans, len](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t c = 0; c < chans; ++c) {
                for (std::size_t t = 0; t < len; ++t) {
                    g(c, t) += self.grad(c, t) * m[t];
                }
            }
        });
    });
}

Var matmul(const Var& a, const Var& b) {
    require_rank("matmul", "a", a, 2);
    require_rank("matmul", "b", b, 2);
    const std::size_t m = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t n = b.shape()[1];
    if (b.shape()[0] != k) {
        shape_fail("matmul", "inner dimensions differ: " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    Array out({m, n});
    as_mat(out, m, n).noalias() = as_mat(a.value(), m, k) * as_mat(b.value(), k, n);
    return Var::from_op(std::move(out), {a, b}, [m, k, n](Node& self) {
        const auto dy = as_mat(self.grad, m, n);
        const Array& av = self.parents[0].value();
        const Array& bv = self.parents[1].value();
        accumulate(self, 0, [&](Array& g) { as_mat(g, m, k).noalias() += dy * as_mat(bv, k, n).transpose(); });
        accumulate(self, 1, [&](Array& g) { as_mat(g, k, n).noalias() += as_mat(av, m, k).transpose() * dy; });
    });
}

Var transpose(const Var& a) {
    require_rank("transpose", "a", a, 2);
    const std::size_t r = a.shape()[0];
    const std::size_t c = a.shape()[1];
    Array out({c, r});
    as_mat(out, c, r) = as_mat(a.value(), r, c).transpose();
    return Var::from_op(std::move(out), {a}, [r, c](Node& self) {
        accumulate(self, 0, [&](Array& g) { as_mat(g, r, c) += as_mat(self.grad, c, r).transpose(); });
    });
}

Var reshape(const Var& a, Shape shape) {
    Array out = a.value().reshaped(std::move(shape));
    return Var::from_op(std::move(out), {a}, [](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        });
    });
}

Var stack_rows(std::span<const Var> rows) {
    if (rows.empty()) {
        shape_fail("stack_rows", "no rows given");
    }
    const Shape row_shape = rows[0].shape();
    if (row_shape.size() != 1) {
        shape_fail("stack_rows", "rows must be rank 1, got " + to_string(row_shape));
    }
    const std::size_t n = row_shape[0];
    Array out({rows.size(), n});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].shape() != row_shape) {
            shape_fail("stack_rows", "row " + std::to_string(r) + " has shape " + to_string(rows[r].shape()) +
                                         ", expected " + to_string(row_shape));
        }
        std::copy_n(rows[r].value().data().begin(), n, out.data().begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    std::vector<Var> parents(rows.begin(), rows.end());
    return Var::from_op(std::move(out), std::move(parents), [n](Node& self) {
        for (std::size_t r = 0; r < self.parents.size(); ++r) {
            accumulate(self, r, [&](Array& g) {
                for (std::size_t i = 0; i < n; ++i) {
                    g[i] += self.grad[r * n + i];
                }
            });
        }
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) {
        s += v;
    }
    return Var::from_op(Array::scalar(s), {a}, [](Node& self) {
        const double d = self.grad[0];
        accumulate(self, 0, [&](Array& g) {
            for (auto& v : g.values()) {
                v += d;
            }
        });
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var softmax_rows(const Var& a) {
    require_rank("softmax_rows", "a", a, 2);
    const std::size_t rows = a.shape()[0];
    const std::size_t cols = a.shape()[1];
    Array out = a.value();
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = out(r, 0);
        for (std::size_t c = 1; c < cols; ++c) {
            mx = std::max(mx, out(r, c));
        }
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) = std::exp(out(r, c) - mx);
            z += out(r, c);
        }
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) /= z;
        }
    }
    Array y = out;
    return Var::from_op(std::move(out), {a}, [y = std::move(y), rows, cols](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    dot += self.grad(r, c) * y(r, c);
                }
                for (std::size_t c = 0; c < cols; ++c) {
                    g(r, c) += y(r, c) * (self.grad(r, c) - dot);
                }
            }
        });
    });
}

Var conv1d(const Var& input, const Var& kernel, std::size_t stride, std::size_t padding) {
    require_rank("conv1d", "input", input, 2);
    require_rank("conv1d", "kernel", kernel, 3);
    const std::size_t c_in = input.shape()[0];
    const std::size_t len = input.shape()[1];
    const std::size_t c_out = kernel.shape()[0];
    const std::size_t ksize = kernel.shape()[2];
    if (kernel.shape()[1] != c_in) {
        shape_fail("conv1d", "kernel " + to_string(kernel.shape()) + " expects " +
                                 std::to_string(kernel.shape()[1]) + " input channels, input is " +
                                 to_string(input.shape()));
    }
    if (stride == 0) {
        shape_fail("conv1d", "stride must be >= 1");
    }
    if (ksize > len + 2 * padding) {
        shape_fail("conv1d", "kernel width " + std::to_string(ksize) + " exceeds padded length " +
                                 std::to_string(len + 2 * padding) + " of input " + to_string(input.shape()));
    }
    const std::size_t out_len = (len + 2 * padding - ksize) / stride + 1;
    const std::size_t rows = c_in * ksize;

    // im2col: cols[c*K + k, t] = x[c, t*stride + k - padding]
    Array cols({rows, out_len}, 0.0);
    const Array& x = input.value();
    for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t k = 0; k < ksize; ++k) {
            double* row = cols.data().data() + (c * ksize + k) * out_len;
            for (std::size_t t = 0; t < out_len; ++t) {
                const auto pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(padding);
                if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) {
                    row[t] = x(c, static_cast<std::size_t>(pos));
                }
            }
        }
    }
    Array out({c_out, out_len});
    as_mat(out, c_out, out_len).noalias() = as_mat(kernel.value(), c_out, rows) * as_mat(cols, rows, out_len);

    return Var::from_op(std::move(out), {input, kernel},
                        [cols = std::move(cols), c_in, len, c_out, ksize, stride, padding, out_len, rows](Node& self) {
                            const auto dy = as_mat(self.grad, c_out, out_len);
                            accumulate(self, 1, [&](Array& g) {
                                as_mat(g, c_out, rows).noalias() += dy * as_mat(cols, rows, out_len).transpose();
                            });
                            accumulate(self, 0, [&](Array& g) {
                                RowMat dcols = as_mat(self.parents[1].value(), c_out, rows).transpose() * dy;
                                for (std::size_t c = 0; c < c_in; ++c) {
                                    for (std::size_t k = 0; k < ksize; ++k) {
                                        const double* row = dcols.data() + (c * ksize + k) * out_len;
                                        for (std::size_t t = 0; t < out_len; ++t) {
                                            const auto pos = static_cast<std::ptrdiff_t>(t * stride + k) -
                                                             static_cast<std::ptrdiff_t>(padding);
                                            if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) {
                                                g(c, static_cast<std::size_t>(pos)) += row[t];
                                            }
                                        }
                                    }
                                }
                            });
                        });
}

Var conv_transpose1d(const Var& input, const Var& kernel, std::size_t stride, std::size_t padding) {
    require_rank("conv_transpose1d", "input", input, 2);
    require_rank("conv_transpose1d", "kernel", kernel, 3);
    const std::size_t c_in = input.shape()[0];
    const std::size_t len = input.shape()[1];
    const std::size_t c_out = kernel.shape()[1];
    const std::size_t ksize = kernel.shape()[2];
    if (kernel.shape()[0] != c_in) {
        shape_fail("conv_transpose1d", "kernel " + to_string(kernel.shape()) + " expects " +
                                           std::to_string(kernel.shape()[0]) + " input channels, input is " +
                                           to_string(input.shape()));
    }
    if (stride == 0) {
        shape_fail("conv_transpose1d", "stride must be >= 1");
    }
    const std::size_t full = (len - 1) * stride + ksize;
    if (full <= 2 * padding) {
        shape_fail("conv_transpose1d", "padding " + std::to_string(padding) + " leaves no output for input " +
                                           to_string(input.shape()));
    }
    const std::size_t out_len = full - 2 * padding;
    const std::size_t rows = c_out * ksize;

    // cols[o*K + k, t] = sum_c W[c, o, k] x[c, t]; scattered to y[o, t*stride + k - padding].
    RowMat cols = as_mat(kernel.value(), c_in, rows).transpose() * as_mat(input.value(), c_in, len);
    Array out({c_out, out_len}, 0.0);
    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t k = 0; k < ksize; ++k) {
            const double* row = cols.data() + (o * ksize + k) * len;
            for (std::size_t t = 0; t < len; ++t) {
                const auto pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(padding);
                if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(out_len)) {
                    out(o, static_cast<std::size_t>(pos)) += row[t];
                }
            }
        }
    }

    return Var::from_op(std::move(out), {input, kernel},
                        [c_in, len, c_out, ksize, stride, padding, out_len, rows](Node& self) {
                            RowMat dcols = RowMat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(len));
                            for (std::size_t o = 0; o < c_out; ++o) {
                                for (std::size_t k = 0; k < ksize; ++k) {
                                    double* row = dcols.data() + (o * ksize + k) * len;
                                    for (std::size_t t = 0; t < len; ++t) {
                                        const auto pos = static_cast<std::ptrdiff_t>(t * stride + k) -
                                                         static_cast<std::ptrdiff_t>(padding);
                                        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(out_len)) {
                                            row[t] = self.grad(o, static_cast<std::size_t>(pos));
                                        }
                                    }
                                }
                            }
                            accumulate(self, 0, [&](Array& g) {
                                as_mat(g, c_in, len).noalias() += as_mat(self.parents[1].value(), c_in, rows) * dcols;
                            });
                            accumulate(self, 1, [&](Array& g) {
                                as_mat(g, c_in, rows).noalias() +=
                                    as_mat(self.parents[0].value(), c_in, len) * dcols.transpose();
                            });
                        });
}

Var local_attention(const Var& q, const Var& k, const Var& v, std::size_t window) {
    require_rank("local_attention", "q", q, 2);
    require_same("local_attention", q, k);
    require_same("local_attention", q, v);
    const std::size_t len = q.shape()[0];
    const std::size_t dim = q.shape()[1];
    if (window % 2 == 0) {
        shape_fail("local_attention", "window must be odd, got " + std::to_string(window));
    }
    if (window > len) {
        shape_fail("local_attention",
                   "window " + std::to_string(window) + " exceeds sequence length " + std::to_string(len));
    }
    const std::size_t half = window / 2;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
    const Array& qv = q.value();
    const Array& kv = k.value();
    const Array& vv = v.value();

    // probs[t, j] is the weight of row (t - half + j); entries outside [0, T) stay 0.
    Array probs({len, window}, 0.0);
    Array out({len, dim}, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
        const std::size_t lo = t >= half ? t - half : 0;
        const std::size_t hi = std::min(len - 1, t + half);
        const double* qt = &qv(t, 0);
        double mx = -INFINITY;
        for (std::size_t s = lo; s <= hi; ++s) {
            const double* ks = &kv(s, 0);
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                dot += qt[d] * ks[d];
            }
            const double score = dot * inv_sqrt_d;
            probs(t, s + half - t) = score;
            mx = std::max(mx, score);
        }
        double z = 0.0;
        for (std::size_t s = lo; s <= hi; ++s) {
            double& p = probs(t, s + half - t);
            p = std::exp(p - mx);
            z += p;
        }
        double* ot = &out(t, 0);
        for (std::size_t s = lo; s <= hi; ++s) {
            double& p = probs(t, s + half - t);
            p /= z;
            const double* vs = &vv(s, 0);
            for (std::size_t d = 0; d < dim; ++d) {
                ot[d] += p * vs[d];
            }
        }
    }

    return Var::from_op(std::move(out), {q, k, v},
                        [probs = std::move(probs), len, dim, half, inv_sqrt_d](Node& self) {
                            const Array& qv = self.parents[0].value();
                            const Array& kv = self.parents[1].value();
                            const Array& vv = self.parents[2].value();
                            const bool need_q = self.parents[0].requires_grad();
                            const bool need_k = self.parents[1].requires_grad();
                            const bool need_v = self.parents[2].requires_grad();
                            Array* gq = need_q ? &self.parents[0].mutable_grad() : nullptr;
                            Array* gk = need_k ? &self.parents[1].mutable_grad() : nullptr;
                            Array* gv = need_v ? &self.parents[2].mutable_grad() : nullptr;
                            std::vector<double> dscore(2 * half + 1);
                            for (std::size_t t = 0; t < len; ++t) {
                                const std::size_t lo = t >= half ? t - half : 0;
                                const std::size_t hi = std::min(len - 1, t + half);
                                const double* dy = &self.grad(t, 0);
                                double weighted = 0.0;
                                for (std::size_t s = lo; s <= hi; ++s) {
                                    const double p = probs(t, s + half - t);
                                    const double* vs = &vv(s, 0);
                                    double dp = 0.0;
                                    for (std::size_t d = 0; d < dim; ++d) {
                                        dp += dy[d] * vs[d];
                                    }
                                    dscore[s + half - t] = dp;
                                    weighted += p * dp;
                                    if (gv) {
                                        double* g = &(*gv)(s, 0);
                                        for (std::size_t d = 0; d < dim; ++d) {
                                            g[d] += p * dy[d];
                                        }
                                    }
                                }
                                for (std::size_t s = lo; s <= hi; ++s) {
                                    const std::size_t j = s + half - t;
                                    const double ds = probs(t, j) * (dscore[j] - weighted) * inv_sqrt_d;
                                    if (gq) {
                                        const double* ks = &kv(s, 0);
                                        double* g = &(*gq)(t, 0);
                                        for (std::size_t d = 0; d < dim; ++d) {
                                            g[d] += ds * ks[d];
                                        }
                                    }
                                    if (gk) {
                                        const double* qt = &qv(t, 0);
                                        double* g = &(*gk)(s, 0);
                                        for (std::size_t d = 0; d < dim; ++d) {
                                            g[d] += ds * qt[d];
                                        }
                                    }
                                }
                            }
                        });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    require_rank("layer_norm", "x", x, 2);
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    if (gain.shape() != Shape{cols} || bias.shape() != Shape{cols}) {
        shape_fail("layer_norm", "gain " + to_string(gain.shape()) + " / bias " + to_string(bias.shape()) +
                                     " do not match x " + to_string(x.shape()));
    }
    if (!(eps > 0.0)) {
        throw std::invalid_argument("layer_norm: eps must be positive");
    }
    Array xhat({rows, cols});
    std::vector<double> inv_std(rows);
    Array out({rows, cols});
    const Array& xv = x.value();
    const Array& gv = gain.value();
    const Array& bv = bias.value();
    for (std::size_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            mu += xv(r, c);
        }
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = xv(r, c) - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            xhat(r, c) = (xv(r, c) - mu) * inv_std[r];
            out(r, c) = xhat(r, c) * gv[c] + bv[c];
        }
    }
    return Var::from_op(std::move(out), {x, gain, bias},
                        [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, cols](Node& self) {
                            const Array& gv = self.parents[1].value();
                            accumulate(self, 0, [&](Array& g) {
                                const double n = static_cast<double>(cols);
                                for (std::size_t r = 0; r < rows; ++r) {
                                    double mean_dxhat = 0.0;
                                    double mean_dxhat_xhat = 0.0;
                                    for (std::size_t c = 0; c < cols; ++c) {
                                        const double d = self.grad(r, c) * gv[c];
                                        mean_dxhat += d;
                                        mean_dxhat_xhat += d * xhat(r, c);
                                    }
                                    mean_dxhat /= n;
                                    mean_dxhat_xhat /= n;
                                    for (std::size_t c = 0; c < cols; ++c) {
                                        const double d = self.grad(r, c) * gv[c];
                                        g(r, c) += inv_std[r] * (d - mean_dxhat - xhat(r, c) * mean_dxhat_xhat);
                                    }
                                }
                            });
                            accumulate(self, 1, [&](Array& g) {
                                for (std::size_t r = 0; r < rows; ++r) {
                                    for (std::size_t c = 0; c < cols; ++c) {
                                        g[c] += self.grad(r, c) * xhat(r, c);
                                    }
                                }
                            });
                            accumulate(self, 2, [&](Array& g) {
                                for (std::size_t r = 0; r < rows; ++r) {
                                    for (std::size_t c = 0; c < cols; ++c) {
                                        g[c] += self.grad(r, c);
                                    }
                                }
                            });
                        });
}

Var masked_mean_rows(const Var& x, const Array& m, double eps) {
    require_rank("masked_mean_rows", "x", x, 2);
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    if (m.shape() != Shape{rows}) {
        shape_fail("masked_mean_rows",
                   "mask " + to_string(m.shape()) + " does not match x " + to_string(x.shape()));
    }
    double total = 0.0;
    for (double w : m.data()) {
        total += w;
    }
    const double denom = std::max(total, eps);
    Array out({cols}, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] += x.value()(r, c) * m[r];
        }
    }
    for (auto& v : out.values()) {
        v /= denom;
    }
    return Var::from_op(std::move(out), {x}, [m, rows, cols, denom](Node& self) {
        accumulate(self, 0, [&](Array& g) {
            for (std::size_t r = 0; r < rows; ++r) {
                const double w = m[r] / denom;
                for (std::size_t c = 0; c < cols; ++c) {
                    g(r, c) += self.grad[c] * w;
                }
            }
        });
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) { return add_bias_rows(matmul(x, weight), bias); }

Array interpolate_linear(std::span<const double> m, std::size_t target_len) {
    const std::size_t len = m.size();
    if (len == 0 || target_len == 0) {
        throw std::invalid_argument("interpolate_linear: lengths must be >= 1");
    }
    Array out({target_len});
    // Source position of output i is ((2i + 1) T - T') / (2 T'), evaluated exactly in integers.
    const auto den = static_cast<std::int64_t>(2 * target_len);
    for (std::size_t i = 0; i < target_len; ++i) {
        const auto num = static_cast<std::int64_t>((2 * i + 1) * len) - static_cast<std::int64_t>(target_len);
        if (num <= 0) {
            out[i] = m[0];
            continue;
        }
        const auto idx = static_cast<std::size_t>(num / den);
        if (idx >= len - 1) {
            out[i] = m[len - 1];
            continue;
        }
        const double frac = static_cast<double>(num % den) / static_cast<double>(den);
        out[i] = frac == 0.0 ? m[idx] : (1.0 - frac) * m[idx] + frac * m[idx + 1];
    }
    return out;
}

}  // namespace nerula
