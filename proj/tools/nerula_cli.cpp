// nerula: command-line front end for corpus synthesis, pretraining, probing,
// the ablation ladder, reconstruction demos and gradient checks.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nerula/config.hpp"
#include "nerula/gradsuite.hpp"
#include "nerula/plot.hpp"
#include "nerula/probe.hpp"
#include "nerula/training.hpp"

namespace fs = std::filesystem;
using namespace nerula;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::vector<std::string> overrides;
    std::optional<std::string> strategy;
    std::optional<double> w_recon;
    std::optional<double> w_nce;
    std::optional<double> delta;
    std::optional<int> rung;
    std::string checkpoint;
    std::vector<std::string> inputs;
};

struct Effective {
    RunConfig run;
    json raw;  // what run.json records
};

Effective resolve(const Common& c) {
    json j = to_json(RunConfig{});
    if (!c.config_path.empty()) {
        std::ifstream in(c.config_path);
        if (!in) {
            throw ConfigError("cannot open config file '" + c.config_path + "'");
        }
        json file;
        try {
            file = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config file '" + c.config_path + "': " + e.what());
        }
        // Validate the file on its own, then merge over the defaults.
        (void)run_config_from_json(file);
        j.merge_patch(file);
    }
    for (const auto& o : c.overrides) {
        apply_override(j, o);
    }
    if (c.seed) {
        j["train"]["seed"] = *c.seed;
    }
    if (c.strategy) {
        j["train"]["strategy"]["variant"] = std::string(to_string(parse_pair_variant(*c.strategy)));
    }
    if (c.w_recon) {
        j["train"]["weights"]["w_recon"] = *c.w_recon;
    }
    if (c.w_nce) {
        j["train"]["weights"]["w_nce"] = *c.w_nce;
    }
    if (c.delta) {
        j["train"]["weights"]["huber_delta"] = *c.delta;
    }
    Effective e{run_config_from_json(j), {}};
    if (c.rung) {
        e.run.train = ladder_config(e.run.train, *c.rung);
    }
    e.raw = to_json(e.run);
    return e;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

void write_run_json(const fs::path& out, const std::string& command, const Effective& e, const Common& c,
                    double wall_seconds, const json& extra = json::object()) {
    json r;
    r["command"] = command;
    r["config"] = e.raw;
    r["seeds"] = {{"root", e.run.train.seed},
                  {"corpus", e.run.corpus.seed},
                  {"probe_split", e.run.probe.split_seed}};
    if (c.rung) {
        r["ladder_rung"] = *c.rung;
    }
    if (!c.checkpoint.empty()) {
        r["checkpoint"] = c.checkpoint;
    }
    r["versions"] = {{"nerula", kVersion},
                     {"checkpoint_format", kCheckpointVersion},
                     {"rng", std::string(RngStream::algorithm)}};
    r["started_utc"] = utc_now();
    r["wall_seconds"] = wall_seconds;
    for (const auto& [k, v] : extra.items()) {
        r[k] = v;
    }
    write_text_file(out / "run.json", r.dump(2) + "\n");
}

void write_metrics_csv(const fs::path& path, const std::vector<ProbeResult>& results) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "task,probe,metric,value\n" << std::setprecision(17);
    for (const auto& r : results) {
        for (const auto& [name, value] : r.metrics) {
            out << r.task << ',' << r.probe_kind << ',' << name << ',' << value << '\n';
        }
    }
}

Corpus make_corpus(const RunConfig& run) { return build_corpus(run.corpus, RngStream(run.corpus.seed)); }

std::vector<Signal> load_inputs(const std::vector<std::string>& paths) {
    std::vector<Signal> out;
    for (const auto& p : paths) {
        const fs::path path(p);
        Signal s = path.extension() == ".csv" ? load_signal_csv(path) : load_signal_f32(path);
        s.id = path.stem().string();
        out.push_back(std::move(s));
    }
    return out;
}

// --- subcommands -----------------------------------------------------------

int cmd_synth(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Effective e = resolve(c);
    const Corpus corpus = make_corpus(e.run);
    const fs::path out(c.out);
    fs::create_directories(out / "signals");
    std::ofstream index(out / "index.csv");
    index << "id,split,label\n" << std::setprecision(17);
    auto dump = [&](const std::vector<Signal>& set, const char* split) {
        for (const auto& s : set) {
            save_signal_f32(s, out / "signals" / (s.id + ".nrla"));
            index << s.id << ',' << split << ',';
            if (s.has_class()) {
                index << s.class_id();
            } else if (std::holds_alternative<double>(s.label)) {
                index << s.target();
            }
            index << '\n';
        }
    };
    dump(corpus.pretrain, "pretrain");
    dump(corpus.probe, "probe");
    dump(corpus.attribute, "attribute");
    dump(corpus.regression, "regression");
    if (!corpus.probe.empty()) {
        std::vector<Series> series;
        for (std::size_t k = 0; k < std::min<std::size_t>(3, corpus.probe.size()); ++k) {
            const auto& s = corpus.probe[k];
            series.push_back({s.id, {s.samples.begin(), s.samples.begin() + std::min<std::size_t>(900, s.length())}});
        }
        write_text_file(out / "examples.svg", line_chart_svg(series, "Synthetic ECG examples", "sample", "mV"));
    }
    std::cout << "wrote " << corpus.size() << " signals to " << (out / "signals").string() << "\n";
    write_run_json(out, "synth", e, c, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                   {{"signal_count", corpus.size()}});
    return 0;
}

PretrainResult train_into(const fs::path& out, const TrainConfig& cfg, const std::vector<Signal>& corpus,
                          const std::string& label) {
    fs::create_directories(out);
    PretrainOptions opts;
    opts.checkpoint_dir = out;
    opts.on_epoch = [&](const EpochSummary& s) {
        std::cout << label << "epoch " << s.epoch << "/" << cfg.epochs << "  nce " << std::fixed
                  << std::setprecision(4) << s.nce << "  recon " << s.recon << "  total " << s.total << "  ("
                  << std::setprecision(1) << s.seconds << " s)\n"
                  << std::defaultfloat << std::flush;
    };
    PretrainResult r = pretrain(corpus, cfg, opts);
    r.log.write_csv(out / "losses.csv");
    std::vector<double> totals, nces, recons;
    for (const auto& s : r.log.steps) {
        totals.push_back(s.total);
        nces.push_back(s.nce);
        recons.push_back(s.recon);
    }
    write_text_file(out / "loss_curve.svg",
                    line_chart_svg({{"total", totals}, {"nce", nces}, {"recon", recons}}, "Pretraining loss", "step",
                                   "loss"));
    return r;
}

int cmd_pretrain(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Effective e = resolve(c);
    const Corpus corpus = make_corpus(e.run);
    const fs::path out(c.out);
    const PretrainResult r = train_into(out, e.run.train, corpus.pretrain, "");
    const auto& first = r.log.epochs.front();
    const auto& last = r.log.epochs.back();
    write_run_json(out, "pretrain", e, c,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                   {{"checkpoint", (out / "final.nrck").string()},
                    {"first_epoch_total", first.total},
                    {"last_epoch_total", last.total}});
    std::cout << "checkpoint: " << (out / "final.nrck").string() << "\n";
    return 0;
}

int cmd_embed(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Effective e = resolve(c);
    const Checkpoint ck = load_checkpoint(c.checkpoint);
    const std::vector<Signal> signals = c.inputs.empty() ? make_corpus(e.run).probe : load_inputs(c.inputs);
    const EmbeddingMatrix m = embed_signals(signals, ck.params, ck.config.encoder);
    const fs::path out(c.out);
    fs::create_directories(out);
    std::ofstream csv(out / "embeddings.csv");
    csv << "id,target" << std::setprecision(17);
    for (std::size_t k = 0; k < m.dim(); ++k) {
        csv << ",e" << k;
    }
    csv << '\n';
    for (std::size_t r = 0; r < m.size(); ++r) {
        csv << m.ids[r] << ',' << m.targets[r];
        for (std::size_t k = 0; k < m.dim(); ++k) {
            csv << ',' << m.rows(r, k);
        }
        csv << '\n';
    }
    std::cout << "embedded " << m.size() << " signals -> " << (out / "embeddings.csv").string() << "\n";
    write_run_json(out, "embed", e, c, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                   {{"rows", m.size()}, {"dim", m.dim()}});
    return 0;
}

int cmd_probe(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Effective e = resolve(c);
    const Checkpoint ck = load_checkpoint(c.checkpoint);
    const Corpus corpus = make_corpus(e.run);
    std::vector<ProbeResult> results;
    results.push_back(evaluate_classification(embed_signals(corpus.probe, ck.params, ck.config.encoder), e.run.probe,
                                              "rhythm-3class"));
    if (!corpus.attribute.empty()) {
        results.push_back(evaluate_classification(
            embed_signals(corpus.attribute, ck.params, ck.config.encoder), e.run.probe, "morphology-attribute"));
    }
    if (!corpus.regression.empty()) {
        results.push_back(evaluate_regression(embed_signals(corpus.regression, ck.params, ck.config.encoder),
                                              e.run.probe, "heart-rate"));
    }
    const fs::path out(c.out);
    fs::create_directories(out);
    write_metrics_csv(out / "metrics.csv", results);
    for (const auto& r : results) {
        std::cout << std::left << std::setw(22) << r.task << std::setw(10) << r.probe_kind;
        for (const auto& [name, value] : r.metrics) {
            std::cout << "  " << name << " " << std::fixed << std::setprecision(4) << value;
        }
        std::cout << std::defaultfloat << "\n";
    }
    write_run_json(out, "probe", e, c, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_ablate(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Effective e = resolve(c);
    const Corpus corpus = make_corpus(e.run);
    const fs::path out(c.out);
    std::map<int, RungArtifacts> rungs;
    json rung_configs = json::object();
    for (int rung = 1; rung <= 4; ++rung) {
        const TrainConfig cfg = ladder_config(e.run.train, rung);
        const fs::path dir = out / ("rung-" + std::to_string(rung));
        train_into(dir, cfg, corpus.pretrain, "[rung " + std::to_string(rung) + "] ");
        rungs[rung] = {dir / "final.nrck", dir / "losses.csv"};
        rung_configs[std::to_string(rung)] = {{"name", ladder_name(rung)}, {"train", to_json(cfg)}};
    }
    const AblationReport report = run_ablation_suite(rungs, corpus.probe, e.run.probe, out);
    std::vector<ProbeResult> flat;
    for (const auto& row : report.rows) {
        flat.push_back({"rung-" + std::to_string(row.rung) + ":" + row.name, "logistic", row.metrics,
                        e.run.probe.split_seed});
    }
    write_metrics_csv(out / "metrics.csv", flat);
    std::cout << report.table();
    write_run_json(out, "ablate", e, c, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                   {{"rungs", rung_configs}});
    return 0;
}

int cmd_recon_demo(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Effective e = resolve(c);
    const Checkpoint ck = load_checkpoint(c.checkpoint);
    const std::vector<Signal> signals = c.inputs.empty() ? make_corpus(e.run).probe : load_inputs(c.inputs);
    const fs::path out(c.out);
    fs::create_directories(out);
    RngStream rng = RngStream(e.run.train.seed).split("recon-demo");
    const double delta = ck.config.weights.huber_delta;
    double model_sum = 0.0, interp_sum = 0.0;
    for (std::size_t i = 0; i < signals.size(); ++i) {
        const std::vector<double> x = normalize(std::span<const double>(signals[i].samples));
        ck.config.encoder.check_length(x.size());
        const MaskSpec mask = sample_patch_mask(x.size(), rng);
        const Array m = mask.as_array();
        const Var x_hat = decode(encode(x, m.data(), ck.params, ck.config.encoder), ck.params, ck.config.encoder);
        const InterpResult interp = interp_baseline(x, mask, delta);
        model_sum += masked_huber(x, x_hat.value().data(), mask, delta);
        interp_sum += interp.huber_masked;
        if (i == 0) {
            const std::size_t n = std::min<std::size_t>(x.size(), 1200);
            std::vector<double> masked(n);
            for (std::size_t t = 0; t < n; ++t) {
                masked[t] = mask.bits[t] ? x[t] : std::nan("");
            }
            write_text_file(out / "recon_overlay.svg",
                            line_chart_svg({{"signal", {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)}},
                                            {"model", {x_hat.value().data().begin(),
                                                       x_hat.value().data().begin() + static_cast<std::ptrdiff_t>(n)}},
                                            {"interpolation", {interp.reconstruction.begin(),
                                                               interp.reconstruction.begin() +
                                                                   static_cast<std::ptrdiff_t>(n)}},
                                            {"visible", masked}},
                                           "Reconstruction of masked patches: " + signals[i].id, "sample",
                                           "z-scored amplitude"));
        }
    }
    const double n = static_cast<double>(signals.size());
    std::ofstream csv(out / "metrics.csv");
    csv << "task,probe,metric,value\n" << std::setprecision(17);
    csv << "reconstruction,model,masked_huber," << model_sum / n << '\n';
    csv << "reconstruction,interpolation,masked_huber," << interp_sum / n << '\n';
    std::cout << "masked Huber over " << signals.size() << " signals: model " << model_sum / n << ", interpolation "
              << interp_sum / n << "\n";
    write_run_json(out, "recon-demo", e, c,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_fd_check(const Common& c, int seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const Effective e = resolve(c);
    const fs::path out(c.out);
    fs::create_directories(out);
    std::ofstream csv(out / "metrics.csv");
    csv << "seed,case,max_rel_error,checked,passed\n" << std::setprecision(17);
    std::size_t failures = 0, total = 0;
    for (int k = 0; k < seeds; ++k) {
        const std::uint64_t seed = e.run.train.seed + static_cast<std::uint64_t>(k);
        for (const auto& r : run_gradient_suite(seed)) {
            ++total;
            failures += r.passed ? 0 : 1;
            csv << seed << ',' << r.name << ',' << r.report.max_rel_error << ',' << r.report.checked << ','
                << (r.passed ? 1 : 0) << '\n';
            if (!r.passed) {
                std::cout << "FAIL seed " << seed << " " << r.name << " max_rel_error " << r.report.max_rel_error
                          << "\n";
            }
        }
    }
    std::cout << total - failures << "/" << total << " gradient checks passed\n";
    write_run_json(out, "fd-check", e, c, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                   {{"checks", total}, {"failures", failures}});
    if (failures > 0) {
        throw std::runtime_error(std::to_string(failures) + " gradient checks exceeded tolerance");
    }
    return 0;
}

std::string one_line(std::string s) {
    for (char& ch : s) {
        if (ch == '\n' || ch == '\r') {
            ch = ' ';
        }
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised ECG representation learning with complementary masks"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Common c;
    int fd_seeds = 5;

    auto add_common = [&](CLI::App* sub, bool train_flags) {
        sub->add_option("--config", c.config_path, "JSON run config")->check(CLI::ExistingFile);
        sub->add_option("--seed", c.seed, "root seed (overrides train.seed)");
        sub->add_option("--out", c.out, "output directory")->capture_default_str();
        sub->add_option("--set", c.overrides, "override a config key: dotted.key=value");
        if (train_flags) {
            sub->add_option("--strategy", c.strategy, "positive-pair strategy")
                ->check(CLI::IsMember({"nerula_mask", "random_point", "random_point_mask", "byol", "byol_augment",
                                       "clocs", "clocs_segments"}));
            sub->add_option("--w-recon", c.w_recon, "reconstruction loss weight")->check(CLI::NonNegativeNumber);
            sub->add_option("--w-nce", c.w_nce, "cosine loss weight")->check(CLI::NonNegativeNumber);
            sub->add_option("--delta", c.delta, "Huber threshold")->check(CLI::PositiveNumber);
            sub->add_option("--ladder-rung", c.rung, "ablation ladder rung")->check(CLI::Range(1, 4));
        }
    };
    auto add_checkpoint = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
    };

    CLI::App* synth = app.add_subcommand("synth", "build the synthetic corpus");
    add_common(synth, false);
    CLI::App* pre = app.add_subcommand("pretrain", "pretrain an encoder");
    add_common(pre, true);
    CLI::App* emb = app.add_subcommand("embed", "embed signals with a checkpoint");
    add_common(emb, false);
    add_checkpoint(emb);
    emb->add_option("--input", c.inputs, "signal files (.csv or .nrla); default: the probe set");
    CLI::App* probe = app.add_subcommand("probe", "fit linear probes on frozen embeddings");
    add_common(probe, false);
    add_checkpoint(probe);
    CLI::App* ablate = app.add_subcommand("ablate", "train and score the four-rung ablation ladder");
    add_common(ablate, true);
    CLI::App* recon = app.add_subcommand("recon-demo", "reconstruction overlay and interpolation baseline");
    add_common(recon, false);
    add_checkpoint(recon);
    recon->add_option("--input", c.inputs, "signal files (.csv or .nrla); default: the probe set");
    CLI::App* fd = app.add_subcommand("fd-check", "finite-difference gradient checks");
    add_common(fd, false);
    fd->add_option("--seeds", fd_seeds, "number of seeds")->check(CLI::PositiveNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << one_line(e.what()) << "\n";
        CLI::App* failed = &app;
        for (CLI::App* sub : app.get_subcommands()) {
            failed = sub;
        }
        std::cerr << failed->help();
        return 2;
    }

    try {
        if (*synth) {
            return cmd_synth(c);
        }
        if (*pre) {
            return cmd_pretrain(c);
        }
        if (*emb) {
            return cmd_embed(c);
        }
        if (*probe) {
            return cmd_probe(c);
        }
        if (*ablate) {
            return cmd_ablate(c);
        }
        if (*recon) {
            return cmd_recon_demo(c);
        }
        if (*fd) {
            return cmd_fd_check(c, fd_seeds);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 1;
}
