#include "nerula/config.hpp"

#include <initializer_list>
#include <set>

namespace nerula {

namespace {

void require_object(const json& j, const char* what, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
        throw ConfigError(std::string(what) + ": expected a JSON object");
    }
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* what) {
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(what) + "." + key + ": " + e.what());
    }
}

}  // namespace

json to_json(const EncoderConfig& c) {
    json stem = json::array();
    for (const auto& s : c.stem) {
        stem.push_back({{"channels", s.channels}, {"kernel", s.kernel}, {"stride", s.stride}});
    }
    return {{"stem", stem},
            {"blocks", c.blocks},
            {"dim", c.dim},
            {"window", c.window},
            {"ffn_mult", c.ffn_mult},
            {"rep_dim", c.rep_dim},
            {"decoder_blocks", c.decoder_blocks},
            {"latent_masking", c.latent_masking}};
}

EncoderConfig encoder_config_from_json(const json& j) {
    constexpr const char* what = "encoder";
    require_object(j, what,
                   {"stem", "blocks", "dim", "window", "ffn_mult", "rep_dim", "decoder_blocks", "latent_masking"});
    EncoderConfig c;
    if (j.contains("stem")) {
        if (!j.at("stem").is_array()) {
            throw ConfigError("encoder.stem: expected an array");
        }
        c.stem.clear();
        for (const json& s : j.at("stem")) {
            require_object(s, "encoder.stem[]", {"channels", "kernel", "stride"});
            ConvStage st;
            read(s, "channels", st.channels, "encoder.stem[]");
            read(s, "kernel", st.kernel, "encoder.stem[]");
            read(s, "stride", st.stride, "encoder.stem[]");
            c.stem.push_back(st);
        }
    }
    read(j, "blocks", c.blocks, what);
    read(j, "dim", c.dim, what);
    read(j, "window", c.window, what);
    read(j, "ffn_mult", c.ffn_mult, what);
    read(j, "rep_dim", c.rep_dim, what);
    read(j, "decoder_blocks", c.decoder_blocks, what);
    read(j, "latent_masking", c.latent_masking, what);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

json to_json(const LossWeights& w) {
    return {{"w_nce", w.w_nce}, {"w_recon", w.w_recon}, {"huber_delta", w.huber_delta}};
}

LossWeights loss_weights_from_json(const json& j) {
    constexpr const char* what = "weights";
    require_object(j, what, {"w_nce", "w_recon", "huber_delta"});
    LossWeights w;
    read(j, "w_nce", w.w_nce, what);
    read(j, "w_recon", w.w_recon, what);
    read(j, "huber_delta", w.huber_delta, what);
    try {
        w.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return w;
}

json to_json(const PairStrategy& s) {
    return {{"variant", std::string(to_string(s.variant))},
            {"flip_prob", s.flip_prob},
            {"crop_fraction", s.crop_fraction},
            {"noise_frac", s.noise_frac}};
}

PairStrategy pair_strategy_from_json(const json& j) {
    constexpr const char* what = "strategy";
    require_object(j, what, {"variant", "flip_prob", "crop_fraction", "noise_frac"});
    PairStrategy s;
    std::string variant(to_string(s.variant));
    read(j, "variant", variant, what);
    read(j, "flip_prob", s.flip_prob, what);
    read(j, "crop_fraction", s.crop_fraction, what);
    read(j, "noise_frac", s.noise_frac, what);
    try {
        s.variant = parse_pair_variant(variant);
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.adam.lr},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"adam_eps", c.adam.eps},
            {"weights", to_json(c.weights)},
            {"encoder", to_json(c.encoder)},
            {"strategy", to_json(c.strategy)},
            {"seed", c.seed},
            {"signal_length", c.signal_length},
            {"checkpoint_every", c.checkpoint_every},
            {"recon_masked_only", c.recon_masked_only},
            {"decode_both", c.decode_both}};
}

TrainConfig train_config_from_json(const json& j) {
    constexpr const char* what = "train";
    require_object(j, what,
                   {"epochs", "batch_size", "lr", "beta1", "beta2", "adam_eps", "weights", "encoder", "strategy",
                    "seed", "signal_length", "checkpoint_every", "recon_masked_only", "decode_both"});
    TrainConfig c;
    read(j, "epochs", c.epochs, what);
    read(j, "batch_size", c.batch_size, what);
    read(j, "lr", c.adam.lr, what);
    read(j, "beta1", c.adam.beta1, what);
    read(j, "beta2", c.adam.beta2, what);
    read(j, "adam_eps", c.adam.eps, what);
    if (j.contains("weights")) {
        c.weights = loss_weights_from_json(j.at("weights"));
    }
    if (j.contains("encoder")) {
        c.encoder = encoder_config_from_json(j.at("encoder"));
    }
    if (j.contains("strategy")) {
        c.strategy = pair_strategy_from_json(j.at("strategy"));
    }
    read(j, "seed", c.seed, what);
    read(j, "signal_length", c.signal_length, what);
    read(j, "checkpoint_every", c.checkpoint_every, what);
    read(j, "recon_masked_only", c.recon_masked_only, what);
    read(j, "decode_both", c.decode_both, what);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

json to_json(const CorpusConfig& c) {
    return {{"seed", c.seed},
            {"duration_s", c.duration_s},
            {"fs_hz", c.fs_hz},
            {"pretrain_count", c.pretrain_count},
            {"probe_per_class", c.probe_per_class},
            {"attribute_count", c.attribute_count},
            {"regression_count", c.regression_count},
            {"hr_min", c.hr_min},
            {"hr_max", c.hr_max},
            {"regular_jitter", c.regular_jitter},
            {"irregular_jitter", c.irregular_jitter},
            {"base_noise_sigma", c.base_noise_sigma},
            {"noisy_sigma", c.noisy_sigma},
            {"morphology_spread", c.morphology_spread}};
}

CorpusConfig corpus_config_from_json(const json& j) {
    constexpr const char* what = "corpus";
    require_object(j, what,
                   {"seed", "duration_s", "fs_hz", "pretrain_count", "probe_per_class", "attribute_count",
                    "regression_count", "hr_min", "hr_max", "regular_jitter", "irregular_jitter", "base_noise_sigma",
                    "noisy_sigma", "morphology_spread"});
    CorpusConfig c;
    read(j, "seed", c.seed, what);
    read(j, "duration_s", c.duration_s, what);
    read(j, "fs_hz", c.fs_hz, what);
    read(j, "pretrain_count", c.pretrain_count, what);
    read(j, "probe_per_class", c.probe_per_class, what);
    read(j, "attribute_count", c.attribute_count, what);
    read(j, "regression_count", c.regression_count, what);
    read(j, "hr_min", c.hr_min, what);
    read(j, "hr_max", c.hr_max, what);
    read(j, "regular_jitter", c.regular_jitter, what);
    read(j, "irregular_jitter", c.irregular_jitter, what);
    read(j, "base_noise_sigma", c.base_noise_sigma, what);
    read(j, "noisy_sigma", c.noisy_sigma, what);
    read(j, "morphology_spread", c.morphology_spread, what);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

json to_json(const ProbeConfig& c) {
    return {{"logistic_lambda", c.logistic_lambda}, {"ridge_lambda", c.ridge_lambda},
            {"max_iterations", c.max_iterations},   {"grad_tolerance", c.grad_tolerance},
            {"fit_fraction", c.fit_fraction},       {"split_seed", c.split_seed}};
}

ProbeConfig probe_config_from_json(const json& j) {
    constexpr const char* what = "probe";
    require_object(j, what,
                   {"logistic_lambda", "ridge_lambda", "max_iterations", "grad_tolerance", "fit_fraction",
                    "split_seed"});
    ProbeConfig c;
    read(j, "logistic_lambda", c.logistic_lambda, what);
    read(j, "ridge_lambda", c.ridge_lambda, what);
    read(j, "max_iterations", c.max_iterations, what);
    read(j, "grad_tolerance", c.grad_tolerance, what);
    read(j, "fit_fraction", c.fit_fraction, what);
    read(j, "split_seed", c.split_seed, what);
    if (!(c.fit_fraction > 0.0 && c.fit_fraction < 1.0)) {
        throw ConfigError("probe.fit_fraction must lie in (0, 1)");
    }
    if (!(c.logistic_lambda >= 0.0) || !(c.ridge_lambda >= 0.0)) {
        throw ConfigError("probe: lambdas must be >= 0");
    }
    return c;
}

json to_json(const RunConfig& c) {
    return {{"corpus", to_json(c.corpus)}, {"train", to_json(c.train)}, {"probe", to_json(c.probe)}};
}

RunConfig run_config_from_json(const json& j) {
    require_object(j, "config", {"corpus", "train", "probe"});
    RunConfig c;
    if (j.contains("corpus")) {
        c.corpus = corpus_config_from_json(j.at("corpus"));
    }
    if (j.contains("train")) {
        c.train = train_config_from_json(j.at("train"));
    }
    if (j.contains("probe")) {
        c.probe = probe_config_from_json(j.at("probe"));
    }
    return c;
}

void apply_override(json& j, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) {
            throw ConfigError("override: unknown key '" + key + "'");
        }
        node = &(*node)[part];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    *node = std::move(value);
}

}  // namespace nerula
