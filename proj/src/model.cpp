#include "nerula/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nerula {

void EncoderConfig::validate() const {
    if (stem.empty()) {
        throw std::invalid_argument("encoder: stem needs at least one stage");
    }
    for (const auto& s : stem) {
        if (s.channels == 0 || s.stride == 0 || s.kernel % 2 == 0) {
            throw std::invalid_argument("encoder: stem stages need channels >= 1, stride >= 1 and an odd kernel");
        }
    }
    if (stem.back().channels != dim) {
        throw std::invalid_argument("encoder: last stem stage has " + std::to_string(stem.back().channels) +
                                    " channels but dim is " + std::to_string(dim));
    }
    if (window % 2 == 0) {
        throw std::invalid_argument("encoder: attention window must be odd, got " + std::to_string(window));
    }
    if (dim == 0 || rep_dim == 0 || ffn_mult == 0) {
        throw std::invalid_argument("encoder: dim, rep_dim and ffn_mult must be positive");
    }
}

std::size_t EncoderConfig::total_stride() const {
    std::size_t s = 1;
    for (const auto& st : stem) {
        s *= st.stride;
    }
    return s;
}

std::vector<std::size_t> EncoderConfig::layer_lengths(std::size_t length) const {
    std::vector<std::size_t> out;
    for (const auto& st : stem) {
        length /= st.stride;
        out.push_back(length);
    }
    return out;
}

void EncoderConfig::check_length(std::size_t length) const {
    validate();
    std::size_t len = length;
    for (const auto& st : stem) {
        if (len % st.stride != 0) {
            throw std::invalid_argument("encoder: input length " + std::to_string(length) +
                                        " is not divisible by the stem's total stride " +
                                        std::to_string(total_stride()));
        }
        len /= st.stride;
        if (len == 0) {
            throw std::invalid_argument("encoder: input length " + std::to_string(length) + " too short");
        }
    }
    if ((blocks > 0 || decoder_blocks > 0) && window > len) {
        throw std::invalid_argument("encoder: attention window " + std::to_string(window) +
                                    " exceeds latent length " + std::to_string(len));
    }
}

EncoderConfig compact_encoder_config() {
    EncoderConfig cfg;
    cfg.stem = {{16, 7, 2}, {32, 5, 2}, {64, 5, 2}};
    cfg.dim = 64;
    cfg.blocks = 2;
    cfg.window = 17;
    cfg.decoder_blocks = 1;
    return cfg;
}

namespace {

Array uniform_init(Shape shape, std::size_t fan_in, RngStream& rng) {
    Array a(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : a.values()) {
        v = rng.uniform(-bound, bound);
    }
    return a;
}

void add_linear(ModelParams& p, const std::string& name, std::size_t in, std::size_t out, RngStream& rng) {
    p.add(name + ".weight", uniform_init({in, out}, in, rng));
    p.add(name + ".bias", Array({out}, 0.0));
}

void add_norm(ModelParams& p, const std::string& name, std::size_t dim) {
    p.add(name + ".gain", Array({dim}, 1.0));
    p.add(name + ".bias", Array({dim}, 0.0));
}

void add_block(ModelParams& p, const std::string& prefix, const EncoderConfig& cfg, RngStream& rng) {
    const std::size_t d = cfg.dim;
    add_norm(p, prefix + ".ln1", d);
    for (const char* name : {"q", "k", "v", "out"}) {
        add_linear(p, prefix + ".attn." + name, d, d, rng);
    }
    add_norm(p, prefix + ".ln2", d);
    add_linear(p, prefix + ".ffn.fc1", d, cfg.ffn_mult * d, rng);
    add_linear(p, prefix + ".ffn.fc2", cfg.ffn_mult * d, d, rng);
}

std::size_t decoder_padding(std::size_t stride) { return (stride + 1) / 2; }
std::size_t decoder_kernel(std::size_t stride) { return stride + 2 * decoder_padding(stride); }

const Var& P(const ModelParams& p, const std::string& name) { return p.get(name); }

Var linear_named(const Var& x, const ModelParams& p, const std::string& name) {
    return linear(x, P(p, name + ".weight"), P(p, name + ".bias"));
}

Var norm_named(const Var& x, const ModelParams& p, const std::string& name) {
    return layer_norm(x, P(p, name + ".gain"), P(p, name + ".bias"));
}

// Pre-norm residual block: local attention then a GELU MLP.
Var attention_block(const Var& h_in, const ModelParams& p, const std::string& prefix, const EncoderConfig& cfg) {
    const Var a = norm_named(h_in, p, prefix + ".ln1");
    const Var q = linear_named(a, p, prefix + ".attn.q");
    const Var k = linear_named(a, p, prefix + ".attn.k");
    const Var v = linear_named(a, p, prefix + ".attn.v");
    const Var attn = linear_named(local_attention(q, k, v, cfg.window), p, prefix + ".attn.out");
    const Var h = add(h_in, attn);
    const Var f = norm_named(h, p, prefix + ".ln2");
    const Var mlp = linear_named(gelu(linear_named(f, p, prefix + ".ffn.fc1")), p, prefix + ".ffn.fc2");
    return add(h, mlp);
}

}  // namespace

ModelParams init_params(const EncoderConfig& cfg, RngStream rng) {
    cfg.validate();
    ModelParams p;
    std::size_t c_in = 1;
    for (std::size_t i = 0; i < cfg.stem.size(); ++i) {
        const auto& st = cfg.stem[i];
        const std::string name = "encoder.stem." + std::to_string(i);
        p.add(name + ".weight", uniform_init({st.channels, c_in, st.kernel}, c_in * st.kernel, rng));
        p.add(name + ".bias", Array({st.channels}, 0.0));
        c_in = st.channels;
    }
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        add_block(p, "encoder.block." + std::to_string(b), cfg, rng);
    }
    add_norm(p, "encoder.norm", cfg.dim);
    add_linear(p, "encoder.rep", cfg.dim, cfg.rep_dim, rng);

    add_linear(p, "projector.fc1", cfg.rep_dim, cfg.rep_dim, rng);
    add_linear(p, "projector.fc2", cfg.rep_dim, cfg.rep_dim, rng);

    for (std::size_t b = 0; b < cfg.decoder_blocks; ++b) {
        add_block(p, "decoder.block." + std::to_string(b), cfg, rng);
    }
    // decoder.up.j undoes stem stage (n - 1 - j).
    for (std::size_t j = 0; j < cfg.stem.size(); ++j) {
        const std::size_t stage = cfg.stem.size() - 1 - j;
        const std::size_t in = cfg.stem[stage].channels;
        const std::size_t out = stage == 0 ? 1 : cfg.stem[stage - 1].channels;
        const std::size_t stride = cfg.stem[stage].stride;
        const std::size_t k = decoder_kernel(stride);
        const std::string name = "decoder.up." + std::to_string(j);
        p.add(name + ".weight", uniform_init({in, out, k}, std::max<std::size_t>(1, in * k / stride), rng));
        p.add(name + ".bias", Array({out}, 0.0));
    }
    return p;
}

LatentState encode(std::span<const double> x, std::span<const double> mask, const ModelParams& params,
                   const EncoderConfig& cfg) {
    const std::size_t len = x.size();
    if (mask.size() != len) {
        throw std::invalid_argument("encode: signal length " + std::to_string(len) + " != mask length " +
                                    std::to_string(mask.size()));
    }
    cfg.check_length(len);

    LatentState st;
    st.input_length = len;
    Array input({1, len});
    for (std::size_t t = 0; t < len; ++t) {
        input[t] = x[t] * mask[t];
    }
    Var h = constant(std::move(input));
    for (std::size_t i = 0; i < cfg.stem.size(); ++i) {
        const auto& stage = cfg.stem[i];
        const std::string name = "encoder.stem." + std::to_string(i);
        h = conv1d(h, P(params, name + ".weight"), stage.stride, (stage.kernel - 1) / 2);
        h = gelu(add_bias_channels(h, P(params, name + ".bias")));
        const std::size_t len_l = h.shape()[1];
        Array m = cfg.latent_masking ? interpolate_linear(mask, len_l) : Array({len_l}, 1.0);
        h = mask_channels(h, m);
        st.activations.push_back(h);
        st.layer_masks.push_back(std::move(m));
    }
    const Array m_final = st.layer_masks.back();
    h = transpose(h);
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        h = mask_rows(attention_block(h, params, "encoder.block." + std::to_string(b), cfg), m_final);
        st.activations.push_back(h);
        st.layer_masks.push_back(m_final);
    }
    st.final_features = mask_rows(norm_named(h, params, "encoder.norm"), m_final);
    st.final_mask = m_final;
    st.pooled = masked_mean_rows(st.final_features, m_final);
    const Var row = reshape(st.pooled, {1, cfg.dim});
    st.representation = reshape(linear_named(row, params, "encoder.rep"), {cfg.rep_dim});
    return st;
}

Var project(const Var& representation, const ModelParams& params, const EncoderConfig& cfg) {
    if (representation.shape() != Shape{cfg.rep_dim}) {
        throw ShapeError("project: representation " + to_string(representation.shape()) + " != [" +
                         std::to_string(cfg.rep_dim) + "]");
    }
    const Var row = reshape(representation, {1, cfg.rep_dim});
    const Var hidden = gelu(linear_named(row, params, "projector.fc1"));
    return reshape(linear_named(hidden, params, "projector.fc2"), {cfg.rep_dim});
}

Var decode(const LatentState& latent, const ModelParams& params, const EncoderConfig& cfg) {
    const auto lengths = cfg.layer_lengths(latent.input_length);
    if (!latent.final_features.defined() ||
        latent.final_features.shape() != Shape{lengths.back(), cfg.dim}) {
        throw std::invalid_argument("decode: latent state does not match the decoder configuration");
    }
    Var h = latent.final_features;
    for (std::size_t b = 0; b < cfg.decoder_blocks; ++b) {
        h = attention_block(h, params, "decoder.block." + std::to_string(b), cfg);
    }
    h = transpose(h);
    for (std::size_t j = 0; j < cfg.stem.size(); ++j) {
        const std::size_t stage = cfg.stem.size() - 1 - j;
        const std::size_t stride = cfg.stem[stage].stride;
        const std::string name = "decoder.up." + std::to_string(j);
        h = conv_transpose1d(h, P(params, name + ".weight"), stride, decoder_padding(stride));
        h = add_bias_channels(h, P(params, name + ".bias"));
        if (stage != 0) {
            h = gelu(h);
        }
    }
    if (h.shape() != Shape{1, latent.input_length}) {
        throw std::logic_error("decode: produced " + to_string(h.shape()) + " for input length " +
                               std::to_string(latent.input_length));
    }
    return reshape(h, {latent.input_length});
}

std::vector<double> embed(std::span<const double> x, const ModelParams& params, const EncoderConfig& cfg) {
    const std::vector<double> z = normalize(x);
    const std::vector<double> ones(z.size(), 1.0);
    const LatentState st = encode(z, ones, params, cfg);
    return st.representation.value().values();
}

std::vector<double> embed(const Signal& x, const ModelParams& params, const EncoderConfig& cfg) {
    return embed(std::span<const double>(x.samples), params, cfg);
}

}  // namespace nerula
