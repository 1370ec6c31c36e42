#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "nerula/gradcheck.hpp"
#include "nerula/gradsuite.hpp"
#include "nerula/ops.hpp"
#include "nerula/optim.hpp"
#include "nerula/rng.hpp"

using namespace nerula;

namespace {

Var in(std::vector<double> v) { return leaf(Array::vector(std::move(v))); }

Array random_uniform(Shape shape, RngStream& rng, double lo, double hi) {
    Array a(std::move(shape));
    for (double& v : a.data()) {
        v = rng.uniform(lo, hi);
    }
    return a;
}

}  // namespace

// --- Array -------------------------------------------------------------------

TEST(Array, ShapeAndDataAgree) {
    Array a({2, 3}, 1.5);
    EXPECT_EQ(a.size(), 6u);
    EXPECT_EQ(a.rank(), 2u);
    a(1, 2) = 4.0;
    EXPECT_EQ(a[5], 4.0);
    EXPECT_THROW(Array({2, 3}, std::vector<double>(5)), ShapeError);
    EXPECT_THROW(Array({0, 3}), ShapeError);
    EXPECT_THROW(a.reshaped({4, 2}), ShapeError);
}

// --- RNG -------------------------------------------------------------------

TEST(Rng, MatchesReferenceSplitmix) {
    // First output of the reference SplitMix64 generator seeded with 0.
    RngStream r(0);
    EXPECT_EQ(r.next_u64(), 0xe220a8397b1dcdafULL);
}

TEST(Rng, SameSeedSameSequence) {
    RngStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
    EXPECT_NE(RngStream(42).split("x").next_u64(), RngStream(42).split("y").next_u64());
    EXPECT_EQ(RngStream(42).split(7).next_u64(), RngStream(42).split(7).next_u64());
}

TEST(Rng, UniformIntCoversRangeEvenly) {
    RngStream r(3);
    std::vector<int> counts(7, 0);
    constexpr int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = r.uniform_int(-3, 3);
        ASSERT_GE(v, -3);
        ASSERT_LE(v, 3);
        ++counts[static_cast<std::size_t>(v + 3)];
    }
    // Binomial sd is about 92; 5 sd bound.
    for (int c : counts) {
        EXPECT_NEAR(c, n / 7, 460);
    }
}

TEST(Rng, NormalMoments) {
    RngStream r(9);
    double s = 0, s2 = 0;
    constexpr int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.015);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

// --- forward ops -------------------------------------------------------------

TEST(Conv1d, SumsOfAdjacentPairs) {
    const Var x = constant(Array({1, 3}, {1, 2, 3}));
    const Var k = constant(Array({1, 1, 2}, {1, 1}));
    const Var y = conv1d(x, k, 1, 0);
    ASSERT_EQ(y.shape(), (Shape{1, 2}));
    EXPECT_EQ(y.value()[0], 3.0);
    EXPECT_EQ(y.value()[1], 5.0);
}

TEST(Conv1d, UnitKernelIsIdentity) {
    const Var x = constant(Array({1, 5}, {5, -1, 2, 0.5, 7}));
    const Var y = conv1d(x, constant(Array({1, 1, 1}, {1})), 1, 0);
    EXPECT_EQ(y.value().values(), x.value().values());
}

TEST(Conv1d, OutputLengthAndErrors) {
    const Var x = constant(Array({2, 16}));
    EXPECT_EQ(conv1d(x, constant(Array({3, 2, 5})), 2, 2).shape(), (Shape{3, 8}));
    EXPECT_EQ(conv1d(x, constant(Array({3, 2, 4})), 3, 0).shape(), (Shape{3, 5}));
    try {
        (void)conv1d(x, constant(Array({3, 4, 5})), 1, 2);
        FAIL() << "channel mismatch accepted";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("[3 x 4 x 5]"), std::string::npos) << e.what();
    }
    EXPECT_THROW((void)conv1d(x, constant(Array({3, 2, 20})), 1, 1), ShapeError);
    EXPECT_THROW((void)conv1d(x, constant(Array({3, 2, 3})), 0, 1), ShapeError);
}

TEST(ConvTranspose1d, IsAdjointOfConv1d) {
    // <conv(x), y> == <x, conv_transpose(y)>; the transposed op reads the same
    // [C_out x C_in x K] kernel as [C_in' x C_out' x K].
    RngStream r(5);
    const Array x = random_uniform({3, 12}, r, -1, 1);
    const Array w = random_uniform({2, 3, 4}, r, -1, 1);
    const Var cx = conv1d(constant(x), constant(w), 2, 1);
    const Array y = random_uniform(cx.shape(), r, -1, 1);
    const Var ty = conv_transpose1d(constant(y), constant(w), 2, 1);
    ASSERT_EQ(ty.shape(), x.shape());
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        lhs += cx.value()[i] * y[i];
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        rhs += x[i] * ty.value()[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(LocalAttention, WindowOneReturnsValues) {
    RngStream r(1);
    const Array q = random_uniform({6, 3}, r, -1, 1);
    const Array v = random_uniform({6, 3}, r, -1, 1);
    const Var y = local_attention(constant(q), constant(random_uniform({6, 3}, r, -1, 1)), constant(v), 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_DOUBLE_EQ(y.value()[i], v[i]);
    }
}

TEST(LocalAttention, EqualScoresAverageValues) {
    RngStream r(2);
    const Array qk({5, 4}, 0.0);
    const Array v = random_uniform({5, 4}, r, -1, 1);
    const Var y = local_attention(constant(qk), constant(qk), constant(v), 5);
    for (std::size_t d = 0; d < 4; ++d) {
        double mean = 0;
        for (std::size_t t = 0; t < 5; ++t) {
            mean += v(t, d) / 5.0;
        }
        // Only the middle row sees the whole sequence with W = T.
        EXPECT_NEAR(y.value()(2, d), mean, 1e-14);
    }
}

TEST(LocalAttention, RejectsEvenOrOversizedWindow) {
    const Var x = constant(Array({4, 2}));
    EXPECT_THROW((void)local_attention(x, x, x, 2), ShapeError);
    EXPECT_THROW((void)local_attention(x, x, x, 5), ShapeError);
}

TEST(LayerNorm, ConstantAndNormalizedRows) {
    const Var g = constant(Array({2}, 1.0));
    const Var b = constant(Array({2}, 0.0));
    const Var c = layer_norm(constant(Array({1, 2}, {3.0, 3.0})), g, b);
    EXPECT_EQ(c.value()[0], 0.0);
    EXPECT_EQ(c.value()[1], 0.0);
    const Var n = layer_norm(constant(Array({1, 2}, {-1.0, 1.0})), g, b, 1e-12);
    EXPECT_NEAR(n.value()[0], -1.0, 1e-10);
    EXPECT_NEAR(n.value()[1], 1.0, 1e-10);
}

TEST(Interpolate, StatedExamples) {
    const std::vector<double> m{1, 1, 0, 0};
    const Array half = interpolate_linear(m, 2);
    EXPECT_EQ(half.values(), (std::vector<double>{1, 0}));
    EXPECT_EQ(interpolate_linear(m, 4).values(), m);
    const Array ones = interpolate_linear(std::vector<double>(7, 1.0), 3);
    for (double v : ones.data()) {
        EXPECT_EQ(v, 1.0);
    }
}

TEST(Interpolate, FormulaOracle) {
    // Direct evaluation of position (i + 0.5) T / T' - 0.5 with edge clamping.
    RngStream r(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto t = static_cast<std::size_t>(r.uniform_int(1, 40));
        const auto tp = static_cast<std::size_t>(r.uniform_int(1, 40));
        std::vector<double> m(t);
        for (double& v : m) {
            v = r.uniform(-2, 2);
        }
        const Array out = interpolate_linear(m, tp);
        for (std::size_t i = 0; i < tp; ++i) {
            double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(t) / static_cast<double>(tp) - 0.5;
            pos = std::clamp(pos, 0.0, static_cast<double>(t - 1));
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, t - 1);
            const double f = pos - static_cast<double>(lo);
            EXPECT_NEAR(out[i], m[lo] * (1 - f) + m[hi] * f, 1e-12);
            EXPECT_GE(out[i], *std::min_element(m.begin(), m.end()) - 1e-15);
            EXPECT_LE(out[i], *std::max_element(m.begin(), m.end()) + 1e-15);
        }
    }
}

TEST(Interpolate, ComplementIsPreserved) {
    RngStream r(8);
    for (std::size_t target : {1u, 7u, 375u, 750u, 1500u, 2999u}) {
        std::vector<double> m(3000), mc(3000);
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = r.bernoulli(0.5) ? 1.0 : 0.0;
            mc[i] = 1.0 - m[i];
        }
        const Array a = interpolate_linear(m, target);
        const Array b = interpolate_linear(mc, target);
        for (std::size_t i = 0; i < target; ++i) {
            ASSERT_NEAR(a[i] + b[i], 1.0, 1e-12);
        }
    }
}

TEST(Ops, FiniteOutputsOnRandomInputs) {
    RngStream r(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Var x = constant(random_uniform({6, 4}, r, -10, 10));
        const Var w = constant(random_uniform({4, 4}, r, -10, 10));
        const Var g = constant(random_uniform({4}, r, -10, 10));
        EXPECT_TRUE(gelu(x).value().all_finite());
        EXPECT_TRUE(softmax_rows(x).value().all_finite());
        EXPECT_TRUE(layer_norm(x, g, g).value().all_finite());
        EXPECT_TRUE(local_attention(matmul(x, w), x, x, 3).value().all_finite());
        EXPECT_TRUE(conv1d(transpose(x), constant(random_uniform({2, 4, 3}, r, -10, 10)), 1, 1).value().all_finite());
    }
}

// --- autodiff ----------------------------------------------------------------

TEST(Autodiff, ReusedNodeAccumulates) {
    Var x = in({3.0});
    Var y = add(x, x);
    y.backward();
    EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Autodiff, DiamondVisitsEachNodeOnce) {
    // y = (x * x) + (x * x) through a shared intermediate: dy/dx = 4x.
    Var x = in({1.5});
    Var s = mul(x, x);
    Var y = add(s, s);
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autodiff, GradientShapeMatchesValue) {
    Var x = leaf(Array({3, 2}));
    EXPECT_EQ(x.grad().shape(), x.shape());
    Var y = sum(gelu(x));
    y.backward();
    EXPECT_EQ(x.grad().shape(), x.shape());
}

// --- gradient checks -----------------------------------------------------------

TEST(FdCheck, LinearOpIsExact) {
    const FdReport r = fd_check([](std::span<const Var> v) { return scale(v[0], 3.0); },
                                std::vector<Array>{Array({4}, std::vector<double>{1, -2, 0.5, 3})});
    EXPECT_LT(r.max_rel_error, 1e-10);
}

TEST(FdCheck, Conv1dRandomInstance) {
    RngStream r(21);
    const std::vector<Array> inputs{random_uniform({2, 16}, r, -1, 1), random_uniform({3, 2, 4}, r, -1, 1)};
    const FdReport rep = fd_check([](std::span<const Var> v) { return conv1d(v[0], v[1], 1, 1); }, inputs);
    EXPECT_LT(rep.max_rel_error, 1e-6);
    EXPECT_EQ(rep.checked, 32u + 24u);
}

TEST(FdCheck, AttentionRandomInstance) {
    RngStream r(22);
    const std::vector<Array> inputs{random_uniform({8, 4}, r, -1, 1), random_uniform({8, 4}, r, -1, 1),
                                    random_uniform({8, 4}, r, -1, 1)};
    const FdReport rep =
        fd_check([](std::span<const Var> v) { return sum(local_attention(v[0], v[1], v[2], 3)); }, inputs);
    EXPECT_LT(rep.max_rel_error, 1e-5);
}

TEST(FdCheck, CorruptedBackwardIsDetected) {
    // y = x^2 with the backward rule deliberately off by a factor of 1.5.
    auto broken = [](std::span<const Var> v) {
        Array out = v[0].value();
        for (double& e : out.data()) {
            e *= e;
        }
        return Var::from_op(std::move(out), {v[0]}, [](Node& self) {
            Array& g = self.parents[0].mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += 3.0 * self.parents[0].value()[i] * self.grad[i];
            }
        });
    };
    const FdReport rep = fd_check(broken, std::vector<Array>{Array({3}, std::vector<double>{0.7, -1.2, 2.0})});
    EXPECT_GT(rep.max_rel_error, 1e-2);
}

TEST(FdCheck, RejectsStepOutsideRange) {
    FdOptions o;
    o.eps = 1e-2;
    EXPECT_THROW((void)fd_check([](std::span<const Var> v) { return v[0]; }, std::vector<Array>{Array({1})}, o),
                 std::invalid_argument);
}

class GradientSuite : public ::testing::TestWithParam<int> {};

TEST_P(GradientSuite, EveryOpWithinTolerance) {
    for (const auto& c : run_gradient_suite(static_cast<std::uint64_t>(GetParam()))) {
        EXPECT_TRUE(c.passed) << c.name << " max_rel_error " << c.report.max_rel_error;
        EXPECT_GT(c.report.checked, 0u) << c.name;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientSuite, ::testing::Range(0, 5));

// --- Adam ----------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParams) {
    ParameterSet p;
    p.add("w", Array({3}, std::vector<double>{1, 2, 3}));
    AdamState s;
    adam_step(p, s, {});
    EXPECT_EQ(p.get("w").value().values(), (std::vector<double>{1, 2, 3}));
}

TEST(Adam, FirstStepClosedForm) {
    ParameterSet p;
    p.add("w", Array({1}, 0.0));
    p.get("w").mutable_grad()[0] = 1.0;
    AdamState s;
    AdamConfig c;
    c.lr = 0.1;
    adam_step(p, s, c);
    // m_hat = 1, v_hat = 1: step = -lr * 1 / (1 + eps).
    EXPECT_NEAR(p.get("w").value()[0], -0.1, 1e-8);
}

TEST(Adam, QuadraticMagnitudeDecreases) {
    ParameterSet p;
    p.add("w", Array({1}, 1.0));
    AdamState s;
    AdamConfig c;
    c.lr = 0.1;
    std::vector<double> mags;
    for (int i = 0; i < 10; ++i) {
        p.zero_grad();
        p.get("w").mutable_grad()[0] = 2.0 * p.get("w").value()[0];
        adam_step(p, s, c);
        mags.push_back(std::abs(p.get("w").value()[0]));
    }
    for (std::size_t i = 2; i < mags.size(); ++i) {
        EXPECT_LT(mags[i], mags[i - 1]);
    }
}

TEST(Adam, NonFiniteGradientNamesParameter) {
    ParameterSet p;
    p.add("a", Array({1}, 1.0));
    p.add("b", Array({2}, 1.0));
    p.get("b").mutable_grad()[1] = std::nan("");
    AdamState s;
    try {
        adam_step(p, s, {});
        FAIL();
    } catch (const NonFiniteError& e) {
        EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
    }
    EXPECT_EQ(p.get("a").value()[0], 1.0);
}
