#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nerula/array.hpp"
#include "nerula/masking.hpp"
#include "nerula/model.hpp"
#include "nerula/signals.hpp"

namespace nerula {

struct EmbeddingMatrix {
    Array rows;  // [N x rep_dim]
    std::vector<std::string> ids;
    std::vector<double> targets;  // class index or scalar target per row

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t dim() const { return rows.dim(1); }
    void validate() const;
    EmbeddingMatrix select(std::span<const std::size_t> idx) const;
};

/// Embeds every signal with frozen parameters. Targets come from the labels
/// (class index cast to double, or the scalar target); unlabeled rows get NaN.
EmbeddingMatrix embed_signals(const std::vector<Signal>& signals, const ModelParams& params,
                              const EncoderConfig& cfg);

struct ProbeConfig {
    double logistic_lambda = 1e-3;
    double ridge_lambda = 1e-3;
    std::size_t max_iterations = 5000;
    double grad_tolerance = 1e-5;
    /// Fraction of a labeled set used to fit the probe; the rest is scored.
    double fit_fraction = 0.5;
    std::uint64_t split_seed = 7;
};

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

struct LogisticProbe {
    std::size_t classes = 0;
    Array weights;  // [d x K], on standardized features
    std::vector<double> bias;
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;
    std::size_t iterations = 0;
    double initial_loss = 0.0;  // objective at zero weights
    double final_loss = 0.0;

    Array predict_proba(const Array& x) const;  // [N x K]
    std::vector<int> predict(const Array& x) const;
};

/// Multinomial logistic regression, L2 penalty on the weights (not the bias),
/// full-batch gradient descent with step 1 / L from a power-iteration bound on
/// the Hessian. Stops when the gradient norm drops below the tolerance.
LogisticProbe fit_logistic_probe(const Array& x, std::span<const int> labels, std::size_t classes,
                                 const ProbeConfig& cfg = {});

/// Objective value (mean cross-entropy + lambda/2 |W|^2) of a fitted probe on its
/// standardized training data.
double logistic_objective(const LogisticProbe& probe, const Array& x, std::span<const int> labels, double lambda);

struct RidgeProbe {
    std::vector<double> coef;
    double intercept = 0.0;

    std::vector<double> predict(const Array& x) const;
};

/// Closed-form ridge on centered data: (Xc'Xc + lambda I) w = Xc'yc, unpenalized intercept.
RidgeProbe fit_ridge_probe(const Array& x, std::span<const double> y, double lambda = 1e-3);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

using MetricMap = std::map<std::string, double>;

double accuracy(std::span<const int> pred, std::span<const int> truth);
/// Unweighted mean of per-class F1 over classes present in pred or truth.
double macro_f1(std::span<const int> pred, std::span<const int> truth);
/// Rank-statistic AUC for binary labels (nonzero = positive); ties count 1/2.
double binary_auc(std::span<const double> scores, std::span<const int> labels);
/// One-vs-rest AUC averaged over classes having both positives and negatives.
double ovr_auc(const Array& scores, std::span<const int> truth);
double mean_absolute_error(std::span<const double> pred, std::span<const double> truth);
double r_squared(std::span<const double> pred, std::span<const double> truth);

/// {"accuracy", "f1", "auc"}; auc only when scores are given.
MetricMap classification_metrics(std::span<const int> pred, std::span<const int> truth,
                                 const Array* scores = nullptr);
/// {"mae", "r2"}.
MetricMap regression_metrics(std::span<const double> pred, std::span<const double> truth);

struct ProbeResult {
    std::string task;
    std::string probe_kind;
    MetricMap metrics;
    std::uint64_t seed = 0;
};

/// Fits on the fit split, scores on the held-out split (logistic probe).
ProbeResult evaluate_classification(const EmbeddingMatrix& e, const ProbeConfig& cfg, const std::string& task);
/// Same protocol with the ridge probe.
ProbeResult evaluate_regression(const EmbeddingMatrix& e, const ProbeConfig& cfg, const std::string& task);

// ---------------------------------------------------------------------------
// Interpolation baseline
// ---------------------------------------------------------------------------

struct InterpResult {
    std::vector<double> reconstruction;
    double huber_masked = 0.0;
};

/// Fills masked samples by linear interpolation between the nearest kept
/// neighbours (constant extension at the edges) and reports the mean Huber
/// error over masked samples only.
InterpResult interp_baseline(std::span<const double> x, const MaskSpec& mask, double delta = 1.0);

/// Mean Huber error over the samples where mask bit is 0.
double masked_huber(std::span<const double> y, std::span<const double> y_hat, const MaskSpec& mask,
                    double delta = 1.0);

// ---------------------------------------------------------------------------
// Ablation ladder
// ---------------------------------------------------------------------------

struct RungArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path losses_csv;  // optional: TrainLog CSV for the loss-curve plot
};

struct AblationRow {
    int rung = 0;
    std::string name;
    MetricMap metrics;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    void write_csv(const std::filesystem::path& path) const;
    std::string table() const;
};

/// Embeds the probe set with each rung's checkpoint and scores the logistic
/// probe. Writes ablation.csv and loss_curves.svg into out_dir when non-empty.
AblationReport run_ablation_suite(const std::map<int, RungArtifacts>& rungs, const std::vector<Signal>& probe_set,
                                  const ProbeConfig& cfg, const std::filesystem::path& out_dir = {});

}  // namespace nerula
