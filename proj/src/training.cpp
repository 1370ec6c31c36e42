#include "nerula/training.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "nerula/config.hpp"

namespace nerula {

void TrainConfig::validate() const {
    if (!(adam.lr > 0.0)) {
        throw std::invalid_argument("train: lr must be > 0");
    }
    if (batch_size < 1) {
        throw std::invalid_argument("train: batch_size must be >= 1");
    }
    weights.validate();
    strategy.validate();
    encoder.check_length(signal_length);
}

TrainConfig ladder_config(TrainConfig base, int rung) {
    switch (rung) {
        case 1:
            base.strategy.variant = PairVariant::byol_augment;
            base.encoder.latent_masking = false;
            base.weights.w_recon = 0.0;
            break;
        case 2:
            base.strategy.variant = PairVariant::nerula_mask;
            base.encoder.latent_masking = false;
            base.weights.w_recon = 0.0;
            break;
        case 3:
            base.strategy.variant = PairVariant::nerula_mask;
            base.encoder.latent_masking = true;
            base.weights.w_recon = 0.0;
            break;
        case 4:
            base.strategy.variant = PairVariant::nerula_mask;
            base.encoder.latent_masking = true;
            break;
        default:
            throw std::invalid_argument("ladder rung must be 1..4, got " + std::to_string(rung));
    }
    return base;
}

std::string ladder_name(int rung) {
    switch (rung) {
        case 1:
            return "byol-views";
        case 2:
            return "+complementary-masking";
        case 3:
            return "+latent-masking";
        case 4:
            return "+reconstruction";
        default:
            throw std::invalid_argument("ladder rung must be 1..4, got " + std::to_string(rung));
    }
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "step,nce,recon,total\n" << std::setprecision(17);
    for (const auto& s : steps) {
        out << s.step << ',' << s.nce << ',' << s.recon << ',' << s.total << '\n';
    }
}

std::vector<LossReport> read_loss_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open loss log '" + path.string() + "'");
    }
    std::vector<LossReport> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        LossReport r;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(fields >> r.step >> c1 >> r.nce >> c2 >> r.recon >> c3 >> r.total) || c1 != ',' || c2 != ',' ||
            c3 != ',') {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed loss row");
        }
        rows.push_back(r);
    }
    return rows;
}

namespace {

Var row_of(const Var& v) { return reshape(v, {1, v.shape()[0]}); }

Var reconstruction_loss(std::span<const double> x, const Var& x_hat, std::span<const double> mask,
                        const TrainConfig& cfg) {
    const Var target = constant(Array({x.size()}, std::vector<double>(x.begin(), x.end())));
    if (!cfg.recon_masked_only) {
        return huber_loss(target, x_hat, cfg.weights.huber_delta);
    }
    Array select({x.size()});
    bool any = false;
    for (std::size_t t = 0; t < x.size(); ++t) {
        select[t] = mask[t] < 0.5 ? 1.0 : 0.0;
        any = any || select[t] != 0.0;
    }
    // A view without masked samples falls back to the full signal.
    return any ? huber_loss_selected(target, x_hat, cfg.weights.huber_delta, select)
               : huber_loss(target, x_hat, cfg.weights.huber_delta);
}

}  // namespace

ExampleLoss example_loss(std::span<const double> x, const ViewPair& views, const ModelParams& params,
                         const TrainConfig& cfg) {
    const LatentState lat_i = encode(views.first, views.first_mask, params, cfg.encoder);
    const LatentState lat_j = encode(views.second, views.second_mask, params, cfg.encoder);
    const Var z_i = project(lat_i.representation, params, cfg.encoder);
    const Var z_j = project(lat_j.representation, params, cfg.encoder);
    const Var nce = cosine_nce_loss(row_of(z_i), row_of(z_j));

    ExampleLoss out;
    out.report.nce = nce.value().item();
    const bool train_decoder = cfg.weights.w_recon > 0.0;

    auto recon_for = [&](const LatentState& lat, std::span<const double> mask) {
        if (train_decoder) {
            return reconstruction_loss(x, decode(lat, params, cfg.encoder), mask, cfg);
        }
        // Reported only: decode a detached copy so no gradient reaches the encoder.
        LatentState detached = lat;
        detached.final_features = constant(lat.final_features.value());
        return constant(reconstruction_loss(x, decode(detached, params, cfg.encoder), mask, cfg).value());
    };
    Var recon = recon_for(lat_i, views.first_mask);
    if (cfg.decode_both) {
        recon = scale(add(recon, recon_for(lat_j, views.second_mask)), 0.5);
    }
    out.report.recon = recon.value().item();

    out.total = train_decoder ? add(scale(nce, cfg.weights.w_nce), scale(recon, cfg.weights.w_recon))
                              : scale(nce, cfg.weights.w_nce);
    out.report.total = cfg.weights.w_nce * out.report.nce + cfg.weights.w_recon * out.report.recon;
    return out;
}

PretrainResult pretrain(const std::vector<Signal>& corpus, const TrainConfig& cfg, const PretrainOptions& opts) {
    cfg.validate();
    if (corpus.empty()) {
        throw std::invalid_argument("pretrain: corpus is empty");
    }
    std::vector<std::vector<double>> inputs;
    inputs.reserve(corpus.size());
    for (const auto& s : corpus) {
        if (s.length() != cfg.signal_length) {
            throw std::invalid_argument("pretrain: signal '" + s.id + "' has length " + std::to_string(s.length()) +
                                        ", expected " + std::to_string(cfg.signal_length));
        }
        validate(s);
        inputs.push_back(normalize(std::span<const double>(s.samples)));
    }

    const RngStream root(cfg.seed);
    PretrainResult result{opts.initial ? opts.initial->clone() : init_params(cfg.encoder, root.split("init")),
                          {}};
    ModelParams& params = result.params;
    AdamState adam;
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<std::size_t> order(corpus.size());
    std::int64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        RngStream shuffle_rng = root.split("shuffle").split(epoch);
        shuffle_rng.shuffle(order);

        std::uint64_t digest = 0xcbf29ce484222325ULL;
        auto mix = [&](std::uint64_t v) { digest = splitmix64(digest ^ v); };

        EpochSummary summary;
        summary.epoch = epoch + 1;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            params.zero_grad();
            LossReport report;
            report.step = step;
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t idx = order[i];
                mix(idx);
                RngStream view_rng = root.split("views").split(corpus[idx].id).split(epoch);
                const ViewPair views = generate_views(cfg.strategy, inputs[idx], view_rng);
                for (double m : views.first_mask) {
                    mix(static_cast<std::uint64_t>(m));
                }
                ExampleLoss ex = example_loss(inputs[idx], views, params, cfg);
                if (!std::isfinite(ex.report.total) || !std::isfinite(ex.report.nce) ||
                    !std::isfinite(ex.report.recon)) {
                    throw TrainingError("non-finite loss at step " + std::to_string(step) + " on sample '" +
                                        corpus[idx].id + "'");
                }
                ex.total.backward(Array({1}, inv_b));
                report.nce += ex.report.nce * inv_b;
                report.recon += ex.report.recon * inv_b;
            }
            report.total = cfg.weights.w_nce * report.nce + cfg.weights.w_recon * report.recon;
            try {
                adam_step(params, adam, cfg.adam);
            } catch (const NonFiniteError& e) {
                throw TrainingError("step " + std::to_string(step) + ": " + e.what());
            }
            if (!params.all_finite()) {
                throw TrainingError("non-finite parameter after step " + std::to_string(step));
            }
            result.log.steps.push_back(report);
            summary.nce += report.nce;
            summary.recon += report.recon;
            ++batches;
            ++step;
        }
        summary.nce /= static_cast<double>(batches);
        summary.recon /= static_cast<double>(batches);
        summary.total = cfg.weights.w_nce * summary.nce + cfg.weights.w_recon * summary.recon;
        summary.rng_digest = digest;
        summary.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
        result.log.epochs.push_back(summary);
        if (opts.on_epoch) {
            opts.on_epoch(summary);
        }
        if (!opts.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
            std::ostringstream name;
            name << "epoch-" << std::setw(4) << std::setfill('0') << epoch + 1 << ".nrck";
            save_checkpoint(params, cfg, opts.checkpoint_dir / name.str());
        }
    }
    params.zero_grad();
    result.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (!opts.checkpoint_dir.empty()) {
        save_checkpoint(params, cfg, opts.checkpoint_dir / "final.nrck");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'N', 'R', 'L', 'A', 'C', 'K', 'P', 'T'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, const std::filesystem::path& path) {
    json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["rng_algorithm"] = std::string(RngStream::algorithm);
    manifest["seed"] = cfg.seed;
    manifest["config"] = to_json(cfg);
    json entries = json::array();
    std::string blob;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Array& a = params.at(i).value();
        json e;
        e["name"] = params.names()[i];
        e["shape"] = a.shape();
        e["dtype"] = "float32";
        e["offset"] = blob.size();
        e["nbytes"] = a.size() * 4;
        entries.push_back(std::move(e));
        for (double v : a.data()) {
            put_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
        }
    }
    manifest["parameters"] = std::move(entries);
    manifest["blob_bytes"] = blob.size();
    const std::string text = manifest.dump();

    std::string header(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_le(header, kCheckpointVersion, 4);
    put_le(header, text.size(), 8);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
    }
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) {
        throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string where = "checkpoint '" + path.string() + "'";
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open " + where);
    }
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    constexpr std::size_t header_size = sizeof(kCheckpointMagic) + 4 + 8;
    if (bytes.size() < header_size) {
        throw CheckpointError(where + ": truncated header");
    }
    if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw CheckpointError(where + ": bad magic bytes");
    }
    const auto version = static_cast<std::uint32_t>(get_le(bytes.data() + 8, 4));
    if (version != kCheckpointVersion) {
        throw CheckpointError(where + ": format version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    const std::uint64_t manifest_len = get_le(bytes.data() + 12, 8);
    if (manifest_len > bytes.size() - header_size) {
        throw CheckpointError(where + ": truncated manifest");
    }
    json manifest;
    try {
        manifest = json::parse(bytes.begin() + header_size,
                               bytes.begin() + static_cast<std::ptrdiff_t>(header_size + manifest_len));
    } catch (const json::exception& e) {
        throw CheckpointError(where + ": malformed manifest: " + e.what());
    }
    if (manifest.value("format_version", 0u) != kCheckpointVersion) {
        throw CheckpointError(where + ": manifest version mismatch");
    }

    Checkpoint ck;
    try {
        ck.config = train_config_from_json(manifest.at("config"));
    } catch (const std::exception& e) {
        throw CheckpointError(where + ": bad config: " + e.what());
    }
    const ModelParams expected = init_params(ck.config.encoder, RngStream(0));
    const std::size_t blob_start = header_size + manifest_len;
    const std::size_t blob_size = bytes.size() - blob_start;
    const json& entries = manifest.at("parameters");
    if (entries.size() != expected.size()) {
        throw CheckpointError(where + ": has " + std::to_string(entries.size()) + " parameters, config implies " +
                              std::to_string(expected.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const json& e = entries[i];
        const auto name = e.at("name").get<std::string>();
        const auto shape = e.at("shape").get<Shape>();
        if (name != expected.names()[i]) {
            throw CheckpointError(where + ": parameter " + std::to_string(i) + " is '" + name + "', expected '" +
                                  expected.names()[i] + "'");
        }
        if (shape != expected.at(i).shape()) {
            throw CheckpointError(where + ": parameter '" + name + "' has shape " + to_string(shape) +
                                  ", config implies " + to_string(expected.at(i).shape()));
        }
        if (e.at("dtype").get<std::string>() != "float32") {
            throw CheckpointError(where + ": parameter '" + name + "' has unsupported dtype");
        }
        const auto offset = e.at("offset").get<std::size_t>();
        const auto nbytes = e.at("nbytes").get<std::size_t>();
        if (nbytes != shape_size(shape) * 4 || offset + nbytes > blob_size) {
            throw CheckpointError(where + ": truncated blob for parameter '" + name + "'");
        }
        Array a(shape);
        const unsigned char* p = bytes.data() + blob_start + offset;
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p + 4 * k, 4)));
        }
        if (!a.all_finite()) {
            throw CheckpointError(where + ": parameter '" + name + "' holds non-finite values");
        }
        ck.params.add(name, std::move(a));
    }
    return ck;
}

}  // namespace nerula
