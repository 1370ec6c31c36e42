#include "nerula/gradsuite.hpp"

#include <functional>

#include "nerula/masking.hpp"
#include "nerula/objectives.hpp"
#include "nerula/ops.hpp"

namespace nerula {

EncoderConfig tiny_encoder_config() {
    EncoderConfig c;
    c.stem = {{4, 3, 2}, {8, 3, 2}};
    c.blocks = 1;
    c.dim = 8;
    c.window = 5;
    c.ffn_mult = 2;
    c.rep_dim = 8;
    c.decoder_blocks = 1;
    c.latent_masking = true;
    return c;
}

namespace {

Array random_array(Shape shape, RngStream& rng, double sigma = 1.0) {
    Array a(std::move(shape));
    for (double& v : a.data()) {
        v = rng.normal(0.0, sigma);
    }
    return a;
}

Array random_positive(Shape shape, RngStream& rng) {
    Array a(std::move(shape));
    for (double& v : a.data()) {
        v = rng.uniform(0.1, 1.0);
    }
    return a;
}

struct OpCase {
    std::string name;
    DiffOp op;
    std::vector<Array> inputs;
};

std::vector<OpCase> op_cases(RngStream& rng) {
    std::vector<OpCase> cases;
    auto add_case = [&](std::string name, DiffOp op, std::vector<Array> inputs) {
        cases.push_back({std::move(name), std::move(op), std::move(inputs)});
    };
    using In = std::span<const Var>;

    add_case("add", [](In v) { return add(v[0], v[1]); }, {random_array({3, 4}, rng), random_array({3, 4}, rng)});
    add_case("sub", [](In v) { return sub(v[0], v[1]); }, {random_array({3, 4}, rng), random_array({3, 4}, rng)});
    add_case("mul", [](In v) { return mul(v[0], v[1]); }, {random_array({3, 4}, rng), random_array({3, 4}, rng)});
    add_case("scale", [](In v) { return scale(v[0], -1.7); }, {random_array({5}, rng)});
    add_case("gelu", [](In v) { return gelu(v[0]); }, {random_array({4, 5}, rng, 2.0)});
    add_case("add_bias_rows", [](In v) { return add_bias_rows(v[0], v[1]); },
             {random_array({3, 4}, rng), random_array({4}, rng)});
    add_case("add_bias_channels", [](In v) { return add_bias_channels(v[0], v[1]); },
             {random_array({3, 6}, rng), random_array({3}, rng)});
    const Array row_mask = random_positive({5}, rng);
    add_case("mask_rows", [row_mask](In v) { return mask_rows(v[0], row_mask); }, {random_array({5, 3}, rng)});
    const Array chan_mask = random_positive({6}, rng);
    add_case("mask_channels", [chan_mask](In v) { return mask_channels(v[0], chan_mask); },
             {random_array({2, 6}, rng)});
    add_case("matmul", [](In v) { return matmul(v[0], v[1]); }, {random_array({3, 4}, rng), random_array({4, 5}, rng)});
    add_case("transpose", [](In v) { return transpose(v[0]); }, {random_array({3, 4}, rng)});
    add_case("reshape", [](In v) { return reshape(v[0], {2, 6}); }, {random_array({3, 4}, rng)});
    add_case("stack_rows", [](In v) { return stack_rows(v); }, {random_array({4}, rng), random_array({4}, rng)});
    add_case("sum", [](In v) { return sum(v[0]); }, {random_array({3, 4}, rng)});
    add_case("mean", [](In v) { return mean(v[0]); }, {random_array({3, 4}, rng)});
    add_case("softmax_rows", [](In v) { return softmax_rows(v[0]); }, {random_array({3, 5}, rng, 2.0)});
    add_case("conv1d", [](In v) { return conv1d(v[0], v[1], 1, 1); },
             {random_array({2, 9}, rng), random_array({3, 2, 3}, rng)});
    add_case("conv1d_strided", [](In v) { return conv1d(v[0], v[1], 2, 2); },
             {random_array({3, 12}, rng), random_array({2, 3, 5}, rng)});
    add_case("conv_transpose1d", [](In v) { return conv_transpose1d(v[0], v[1], 2, 1); },
             {random_array({3, 6}, rng), random_array({3, 2, 4}, rng)});
    add_case("local_attention", [](In v) { return local_attention(v[0], v[1], v[2], 3); },
             {random_array({6, 4}, rng), random_array({6, 4}, rng), random_array({6, 4}, rng)});
    add_case("local_attention_wide", [](In v) { return local_attention(v[0], v[1], v[2], 5); },
             {random_array({7, 3}, rng), random_array({7, 3}, rng), random_array({7, 3}, rng)});
    add_case("layer_norm", [](In v) { return layer_norm(v[0], v[1], v[2]); },
             {random_array({4, 6}, rng), random_array({6}, rng), random_array({6}, rng)});
    const Array pool_mask = random_positive({5}, rng);
    add_case("masked_mean_rows", [pool_mask](In v) { return masked_mean_rows(v[0], pool_mask); },
             {random_array({5, 3}, rng)});
    add_case("linear", [](In v) { return linear(v[0], v[1], v[2]); },
             {random_array({3, 4}, rng), random_array({4, 2}, rng), random_array({2}, rng)});
    add_case("cosine_nce_loss", [](In v) { return cosine_nce_loss(v[0], v[1]); },
             {random_array({2, 5}, rng), random_array({2, 5}, rng)});
    add_case("huber_loss", [](In v) { return huber_loss(v[0], v[1], 1.0); },
             {random_array({12}, rng, 1.5), random_array({12}, rng, 1.5)});
    Array select({12});
    for (std::size_t i = 0; i < select.size(); ++i) {
        select[i] = i % 3 == 0 ? 0.0 : 1.0;
    }
    add_case("huber_loss_selected", [select](In v) { return huber_loss_selected(v[0], v[1], 1.0, select); },
             {random_array({12}, rng, 1.5), random_array({12}, rng, 1.5)});
    return cases;
}

}  // namespace

GradCheckCase check_end_to_end(std::uint64_t seed, const FdOptions& opts, double tolerance) {
    const EncoderConfig cfg = tiny_encoder_config();
    RngStream rng = RngStream(seed).split("end-to-end");
    ModelParams params = init_params(cfg, rng.split("init"));
    // Random (not zero) biases so every parameter is exercised.
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params.names()[i].ends_with(".bias")) {
            for (double& v : params.at(i).mutable_value().data()) {
                v = rng.normal(0.0, 0.1);
            }
        }
    }
    constexpr std::size_t batch = 2;
    std::vector<std::vector<double>> xs;
    std::vector<MaskSpec> masks;
    for (std::size_t b = 0; b < batch; ++b) {
        std::vector<double> x(kTinySignalLength);
        for (double& v : x) {
            v = rng.normal();
        }
        xs.push_back(std::move(x));
        masks.push_back(sample_random_point_mask(kTinySignalLength, rng));
    }
    const LossWeights weights;
    auto loss = [&]() {
        std::vector<Var> zi, zj, ys, yhats;
        for (std::size_t b = 0; b < batch; ++b) {
            const Array m = masks[b].as_array();
            const Array mc = masks[b].complement().as_array();
            const LatentState li = encode(xs[b], m.data(), params, cfg);
            const LatentState lj = encode(xs[b], mc.data(), params, cfg);
            zi.push_back(project(li.representation, params, cfg));
            zj.push_back(project(lj.representation, params, cfg));
            ys.push_back(constant(Array({kTinySignalLength}, xs[b])));
            yhats.push_back(decode(li, params, cfg));
        }
        return combined_loss(stack_rows(zi), stack_rows(zj), stack_rows(ys), stack_rows(yhats), weights).total;
    };
    GradCheckCase out{"end_to_end_combined_loss", fd_check_params(loss, params, opts), false};
    out.passed = out.report.max_rel_error < tolerance;
    return out;
}

std::vector<GradCheckCase> run_gradient_suite(std::uint64_t seed, const FdOptions& opts, double tolerance) {
    RngStream rng = RngStream(seed).split("ops");
    std::vector<GradCheckCase> results;
    FdOptions op_opts = opts;
    op_opts.projection_seed = opts.projection_seed ^ seed;
    for (const OpCase& c : op_cases(rng)) {
        GradCheckCase r{c.name, fd_check(c.op, c.inputs, op_opts), false};
        r.passed = r.report.max_rel_error < tolerance;
        results.push_back(std::move(r));
    }
    results.push_back(check_end_to_end(seed, op_opts, tolerance));
    return results;
}

}  // namespace nerula
