#include "nerula/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "nerula/plot.hpp"
#include "nerula/rng.hpp"
#include "nerula/training.hpp"

namespace nerula {

namespace {

using MatrixR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const MatrixR> as_matrix(const Array& a) {
    if (a.rank() != 2) {
        throw ShapeError("expected a 2-D feature matrix, got " + to_string(a.shape()));
    }
    return {a.data().data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(a.dim(1))};
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a == 0 || b == 0) {
        throw std::invalid_argument(std::string(what) + ": empty input");
    }
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": lengths " + std::to_string(a) + " and " +
                                    std::to_string(b) + " differ");
    }
}

double huber(double e, double delta) {
    const double ae = std::abs(e);
    return ae <= delta ? 0.5 * e * e : delta * (ae - 0.5 * delta);
}

}  // namespace

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

void EmbeddingMatrix::validate() const {
    if (rows.rank() != 2 || rows.dim(0) != ids.size() || ids.size() != targets.size()) {
        throw ShapeError("embedding matrix " + to_string(rows.shape()) + " does not match " +
                         std::to_string(ids.size()) + " ids and " + std::to_string(targets.size()) + " targets");
    }
    if (!rows.all_finite()) {
        throw std::invalid_argument("embedding matrix has non-finite rows");
    }
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const std::size_t> idx) const {
    if (idx.empty()) {
        throw std::invalid_argument("EmbeddingMatrix::select: empty selection");
    }
    EmbeddingMatrix out;
    const std::size_t d = dim();
    out.rows = Array({idx.size(), d});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            out.rows(r, c) = rows(idx[r], c);
        }
        out.ids.push_back(ids.at(idx[r]));
        out.targets.push_back(targets.at(idx[r]));
    }
    return out;
}

EmbeddingMatrix embed_signals(const std::vector<Signal>& signals, const ModelParams& params,
                              const EncoderConfig& cfg) {
    if (signals.empty()) {
        throw std::invalid_argument("embed_signals: no signals");
    }
    EmbeddingMatrix out;
    out.rows = Array({signals.size(), cfg.rep_dim});
    for (std::size_t i = 0; i < signals.size(); ++i) {
        const std::vector<double> e = embed(signals[i], params, cfg);
        std::copy(e.begin(), e.end(), out.rows.data().begin() + static_cast<std::ptrdiff_t>(i * cfg.rep_dim));
        out.ids.push_back(signals[i].id);
        const Label& l = signals[i].label;
        if (std::holds_alternative<int>(l)) {
            out.targets.push_back(static_cast<double>(std::get<int>(l)));
        } else if (std::holds_alternative<double>(l)) {
            out.targets.push_back(std::get<double>(l));
        } else {
            out.targets.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Logistic probe
// ---------------------------------------------------------------------------

namespace {

MatrixR standardized(const Array& x, const std::vector<double>& mean, const std::vector<double>& scale) {
    MatrixR z = as_matrix(x);
    if (static_cast<std::size_t>(z.cols()) != mean.size()) {
        throw ShapeError("probe expects " + std::to_string(mean.size()) + " features, got " +
                         std::to_string(z.cols()));
    }
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        z.col(c) = (z.col(c).array() - mean[c]) / scale[c];
    }
    return z;
}

MatrixR softmax_rows(const MatrixR& logits) {
    MatrixR p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

double objective(const MatrixR& z, const MatrixR& w, const Eigen::RowVectorXd& b, std::span<const int> labels,
                 double lambda) {
    const MatrixR logits = (z * w).rowwise() + b;
    double ce = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
        ce += lse - logits(r, labels[static_cast<std::size_t>(r)]);
    }
    return ce / static_cast<double>(z.rows()) + 0.5 * lambda * w.squaredNorm();
}

void check_labels(std::span<const int> labels, std::size_t classes, std::size_t rows) {
    if (classes < 2) {
        throw std::invalid_argument("logistic probe needs at least 2 classes");
    }
    require_same_length(rows, labels.size(), "fit_logistic_probe");
    std::vector<std::size_t> counts(classes, 0);
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) {
            throw std::invalid_argument("logistic probe: label " + std::to_string(l) + " outside [0, " +
                                        std::to_string(classes) + ")");
        }
        ++counts[static_cast<std::size_t>(l)];
    }
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    if (present < 2) {
        throw std::invalid_argument("logistic probe: degenerate training split with a single class");
    }
    for (std::size_t k = 0; k < classes; ++k) {
        if (counts[k] == 0) {
            throw std::invalid_argument("logistic probe: class " + std::to_string(k) + " has no training samples");
        }
    }
}

}  // namespace

LogisticProbe fit_logistic_probe(const Array& x, std::span<const int> labels, std::size_t classes,
                                 const ProbeConfig& cfg) {
    const auto raw = as_matrix(x);
    check_labels(labels, classes, x.dim(0));
    if (!x.all_finite()) {
        throw std::invalid_argument("logistic probe: non-finite features");
    }
    const auto n = raw.rows();
    const auto d = raw.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double lambda = cfg.logistic_lambda;

    LogisticProbe probe;
    probe.classes = classes;
    probe.feature_mean.resize(static_cast<std::size_t>(d));
    probe.feature_scale.resize(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < d; ++c) {
        const double mean = raw.col(c).mean();
        const double var = (raw.col(c).array() - mean).square().mean();
        probe.feature_mean[c] = mean;
        probe.feature_scale[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    const MatrixR z = standardized(x, probe.feature_mean, probe.feature_scale);

    MatrixR onehot = MatrixR::Zero(n, static_cast<Eigen::Index>(classes));
    for (Eigen::Index r = 0; r < n; ++r) {
        onehot(r, labels[static_cast<std::size_t>(r)]) = 1.0;
    }

    // Lipschitz bound of the gradient: the softmax Hessian is below 1/2 I per
    // sample, so L <= 1/2 lambda_max([Z 1]'[Z 1] / N) + lambda.
    MatrixR za(n, d + 1);
    za << z, Eigen::VectorXd::Ones(n);
    const MatrixR gram = za.transpose() * za * inv_n;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1).normalized();
    double eig = 0.0;
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd w = gram * v;
        const double nrm = w.norm();
        if (nrm == 0.0) {
            break;
        }
        const double next = v.dot(w);
        v = w / nrm;
        if (std::abs(next - eig) <= 1e-12 * std::max(1.0, next)) {
            eig = next;
            break;
        }
        eig = next;
    }
    // Power iteration approaches from below; pad so the step stays safe.
    const double lipschitz = 0.5 * eig * 1.01 + lambda + 1e-12;
    const double step = 1.0 / lipschitz;

    MatrixR w = MatrixR::Zero(d, static_cast<Eigen::Index>(classes));
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(classes));
    probe.initial_loss = objective(z, w, b, labels, lambda);
    std::size_t it = 0;
    for (; it < cfg.max_iterations; ++it) {
        const MatrixR p = softmax_rows((z * w).rowwise() + b);
        const MatrixR resid = p - onehot;
        const MatrixR gw = z.transpose() * resid * inv_n + lambda * w;
        const Eigen::RowVectorXd gb = resid.colwise().sum() * inv_n;
        const double gnorm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
        if (gnorm < cfg.grad_tolerance) {
            break;
        }
        w -= step * gw;
        b -= step * gb;
    }
    probe.iterations = it;
    probe.final_loss = objective(z, w, b, labels, lambda);
    probe.weights = Array({static_cast<std::size_t>(d), classes});
    Eigen::Map<MatrixR>(probe.weights.data().data(), d, static_cast<Eigen::Index>(classes)) = w;
    probe.bias.assign(b.data(), b.data() + b.size());
    return probe;
}

Array LogisticProbe::predict_proba(const Array& x) const {
    const MatrixR z = standardized(x, feature_mean, feature_scale);
    const Eigen::Map<const MatrixR> w(weights.data().data(), weights.dim(0), weights.dim(1));
    const Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), static_cast<Eigen::Index>(bias.size()));
    const MatrixR p = softmax_rows((z * w).rowwise() + b);
    Array out({x.dim(0), classes});
    Eigen::Map<MatrixR>(out.data().data(), p.rows(), p.cols()) = p;
    return out;
}

std::vector<int> LogisticProbe::predict(const Array& x) const {
    const Array p = predict_proba(x);
    std::vector<int> out(p.dim(0));
    for (std::size_t r = 0; r < p.dim(0); ++r) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < classes; ++k) {
            if (p(r, k) > p(r, best)) {
                best = k;
            }
        }
        out[r] = static_cast<int>(best);
    }
    return out;
}

double logistic_objective(const LogisticProbe& probe, const Array& x, std::span<const int> labels, double lambda) {
    require_same_length(x.dim(0), labels.size(), "logistic_objective");
    const MatrixR z = standardized(x, probe.feature_mean, probe.feature_scale);
    const Eigen::Map<const MatrixR> w(probe.weights.data().data(), probe.weights.dim(0), probe.weights.dim(1));
    const Eigen::Map<const Eigen::RowVectorXd> b(probe.bias.data(), static_cast<Eigen::Index>(probe.bias.size()));
    return objective(z, w, b, labels, lambda);
}

// ---------------------------------------------------------------------------
// Ridge probe
// ---------------------------------------------------------------------------

RidgeProbe fit_ridge_probe(const Array& x, std::span<const double> y, double lambda) {
    const auto m = as_matrix(x);
    require_same_length(x.dim(0), y.size(), "fit_ridge_probe");
    if (x.dim(0) <= 2) {
        throw std::invalid_argument("fit_ridge_probe: needs more than 2 rows");
    }
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("fit_ridge_probe: lambda must be >= 0");
    }
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::RowVectorXd mean = m.colwise().mean();
    const double y_mean = yv.mean();
    const MatrixR xc = m.rowwise() - mean;
    const Eigen::VectorXd yc = yv.array() - y_mean;
    Eigen::MatrixXd a = xc.transpose() * xc;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd coef = a.ldlt().solve(xc.transpose() * yc);
    RidgeProbe probe;
    probe.coef.assign(coef.data(), coef.data() + coef.size());
    probe.intercept = y_mean - mean.dot(coef);
    return probe;
}

std::vector<double> RidgeProbe::predict(const Array& x) const {
    const auto m = as_matrix(x);
    if (static_cast<std::size_t>(m.cols()) != coef.size()) {
        throw ShapeError("ridge probe expects " + std::to_string(coef.size()) + " features, got " +
                         std::to_string(m.cols()));
    }
    const Eigen::Map<const Eigen::VectorXd> w(coef.data(), static_cast<Eigen::Index>(coef.size()));
    const Eigen::VectorXd p = (m * w).array() + intercept;
    return {p.data(), p.data() + p.size()};
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double accuracy(std::span<const int> pred, std::span<const int> truth) {
    require_same_length(pred.size(), truth.size(), "accuracy");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        hit += pred[i] == truth[i] ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double macro_f1(std::span<const int> pred, std::span<const int> truth) {
    require_same_length(pred.size(), truth.size(), "macro_f1");
    std::set<int> classes(pred.begin(), pred.end());
    classes.insert(truth.begin(), truth.end());
    double sum = 0.0;
    for (int k : classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            tp += (pred[i] == k && truth[i] == k) ? 1 : 0;
            fp += (pred[i] == k && truth[i] != k) ? 1 : 0;
            fn += (pred[i] != k && truth[i] == k) ? 1 : 0;
        }
        sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return sum / static_cast<double>(classes.size());
}

double binary_auc(std::span<const double> scores, std::span<const int> labels) {
    require_same_length(scores.size(), labels.size(), "binary_auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) {
                pos_rank_sum += mid_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("binary_auc: needs both positive and negative labels");
    }
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double ovr_auc(const Array& scores, std::span<const int> truth) {
    if (scores.rank() != 2) {
        throw ShapeError("ovr_auc: scores must be [N x K], got " + to_string(scores.shape()));
    }
    require_same_length(scores.dim(0), truth.size(), "ovr_auc");
    double sum = 0.0;
    std::size_t used = 0;
    std::vector<double> col(scores.dim(0));
    std::vector<int> is_k(scores.dim(0));
    for (std::size_t k = 0; k < scores.dim(1); ++k) {
        std::size_t pos = 0;
        for (std::size_t r = 0; r < scores.dim(0); ++r) {
            col[r] = scores(r, k);
            is_k[r] = truth[r] == static_cast<int>(k) ? 1 : 0;
            pos += static_cast<std::size_t>(is_k[r]);
        }
        if (pos == 0 || pos == scores.dim(0)) {
            continue;
        }
        sum += binary_auc(col, is_k);
        ++used;
    }
    if (used == 0) {
        throw std::invalid_argument("ovr_auc: no class has both positives and negatives");
    }
    return sum / static_cast<double>(used);
}

double mean_absolute_error(std::span<const double> pred, std::span<const double> truth) {
    require_same_length(pred.size(), truth.size(), "mean_absolute_error");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        s += std::abs(pred[i] - truth[i]);
    }
    return s / static_cast<double>(pred.size());
}

double r_squared(std::span<const double> pred, std::span<const double> truth) {
    require_same_length(pred.size(), truth.size(), "r_squared");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) {
        throw std::invalid_argument("r_squared: targets are constant");
    }
    return 1.0 - ss_res / ss_tot;
}

MetricMap classification_metrics(std::span<const int> pred, std::span<const int> truth, const Array* scores) {
    MetricMap m{{"accuracy", accuracy(pred, truth)}, {"f1", macro_f1(pred, truth)}};
    if (scores) {
        m["auc"] = ovr_auc(*scores, truth);
    }
    return m;
}

MetricMap regression_metrics(std::span<const double> pred, std::span<const double> truth) {
    return {{"mae", mean_absolute_error(pred, truth)}, {"r2", r_squared(pred, truth)}};
}

// ---------------------------------------------------------------------------
// Evaluation protocol
// ---------------------------------------------------------------------------

namespace {

std::size_t fit_count(std::size_t n, double fraction) {
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

std::vector<int> class_labels(const EmbeddingMatrix& e) {
    std::vector<int> out;
    for (double t : e.targets) {
        if (!std::isfinite(t) || t != std::round(t) || t < 0) {
            throw std::invalid_argument("classification probe needs non-negative integer targets");
        }
        out.push_back(static_cast<int>(t));
    }
    return out;
}

}  // namespace

ProbeResult evaluate_classification(const EmbeddingMatrix& e, const ProbeConfig& cfg, const std::string& task) {
    e.validate();
    const std::vector<int> labels = class_labels(e);
    const std::size_t classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;

    // Stratified split: each class contributes the same fraction to the fit side.
    const RngStream rng(cfg.split_seed);
    std::vector<std::size_t> fit_idx, test_idx;
    for (std::size_t k = 0; k < classes; ++k) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == static_cast<int>(k)) {
                members.push_back(i);
            }
        }
        if (members.size() < 2) {
            throw std::invalid_argument("evaluate_classification: class " + std::to_string(k) +
                                        " needs at least 2 samples");
        }
        RngStream r = rng.split(k);
        r.shuffle(members);
        const std::size_t nf = fit_count(members.size(), cfg.fit_fraction);
        fit_idx.insert(fit_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(nf));
        test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(nf), members.end());
    }
    std::sort(fit_idx.begin(), fit_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    const EmbeddingMatrix fit = e.select(fit_idx);
    const EmbeddingMatrix test = e.select(test_idx);
    const std::vector<int> fit_labels = class_labels(fit);
    const std::vector<int> test_labels = class_labels(test);

    const LogisticProbe probe = fit_logistic_probe(fit.rows, fit_labels, classes, cfg);
    const Array proba = probe.predict_proba(test.rows);
    const std::vector<int> pred = probe.predict(test.rows);
    return {task, "logistic", classification_metrics(pred, test_labels, &proba), cfg.split_seed};
}

ProbeResult evaluate_regression(const EmbeddingMatrix& e, const ProbeConfig& cfg, const std::string& task) {
    e.validate();
    if (e.size() < 6) {
        throw std::invalid_argument("evaluate_regression: needs at least 6 rows");
    }
    std::vector<std::size_t> order(e.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(cfg.split_seed);
    rng.shuffle(order);
    const std::size_t nf = std::max<std::size_t>(3, fit_count(e.size(), cfg.fit_fraction));
    std::vector<std::size_t> fit_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nf));
    std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(nf), order.end());
    std::sort(fit_idx.begin(), fit_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    const EmbeddingMatrix fit = e.select(fit_idx);
    const EmbeddingMatrix test = e.select(test_idx);
    const RidgeProbe probe = fit_ridge_probe(fit.rows, fit.targets, cfg.ridge_lambda);
    return {task, "ridge", regression_metrics(probe.predict(test.rows), test.targets), cfg.split_seed};
}

// ---------------------------------------------------------------------------
// Interpolation baseline
// ---------------------------------------------------------------------------

InterpResult interp_baseline(std::span<const double> x, const MaskSpec& mask, double delta) {
    if (mask.length() != x.size()) {
        throw ShapeError("interp_baseline: mask length " + std::to_string(mask.length()) + " != signal length " +
                         std::to_string(x.size()));
    }
    const std::size_t kept = mask.kept();
    if (kept == 0 || kept == x.size()) {
        throw std::invalid_argument("interp_baseline: mask must keep some but not all samples");
    }
    InterpResult out;
    out.reconstruction.assign(x.begin(), x.end());
    for (const auto& [s, e] : zero_runs(mask.bits)) {
        for (std::size_t t = s; t < e; ++t) {
            double v;
            if (s == 0) {
                v = x[e];
            } else if (e == x.size()) {
                v = x[s - 1];
            } else {
                const double frac = static_cast<double>(t - (s - 1)) / static_cast<double>(e - (s - 1));
                v = x[s - 1] + (x[e] - x[s - 1]) * frac;
            }
            out.reconstruction[t] = v;
        }
    }
    out.huber_masked = masked_huber(x, out.reconstruction, mask, delta);
    return out;
}

double masked_huber(std::span<const double> y, std::span<const double> y_hat, const MaskSpec& mask, double delta) {
    require_same_length(y.size(), y_hat.size(), "masked_huber");
    if (mask.length() != y.size()) {
        throw ShapeError("masked_huber: mask length " + std::to_string(mask.length()) + " != " +
                         std::to_string(y.size()));
    }
    if (!(delta > 0.0)) {
        throw std::invalid_argument("masked_huber: delta must be > 0");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (mask.bits[t] == 0) {
            sum += huber(y[t] - y_hat[t], delta);
            ++n;
        }
    }
    if (n == 0) {
        throw std::invalid_argument("masked_huber: mask has no masked samples");
    }
    return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Ablation ladder
// ---------------------------------------------------------------------------

void AblationReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "rung,variant,accuracy,f1,auc\n" << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.rung << ',' << r.name << ',' << r.metrics.at("accuracy") << ',' << r.metrics.at("f1") << ','
            << r.metrics.at("auc") << '\n';
    }
}

std::string AblationReport::table() const {
    std::ostringstream out;
    out << std::left << std::setw(6) << "rung" << std::setw(26) << "variant" << std::right << std::setw(10)
        << "accuracy" << std::setw(10) << "f1" << std::setw(10) << "auc" << '\n';
    out << std::fixed << std::setprecision(4);
    for (const auto& r : rows) {
        out << std::left << std::setw(6) << r.rung << std::setw(26) << r.name << std::right << std::setw(10)
            << r.metrics.at("accuracy") << std::setw(10) << r.metrics.at("f1") << std::setw(10)
            << r.metrics.at("auc") << '\n';
    }
    return out.str();
}

AblationReport run_ablation_suite(const std::map<int, RungArtifacts>& rungs, const std::vector<Signal>& probe_set,
                                  const ProbeConfig& cfg, const std::filesystem::path& out_dir) {
    for (int rung = 1; rung <= 4; ++rung) {
        const auto it = rungs.find(rung);
        if (it == rungs.end() || it->second.checkpoint.empty()) {
            throw std::invalid_argument("ablation: missing checkpoint for rung " + std::to_string(rung) + " (" +
                                        ladder_name(rung) + ")");
        }
        if (!std::filesystem::exists(it->second.checkpoint)) {
            throw std::invalid_argument("ablation: checkpoint for rung " + std::to_string(rung) + " (" +
                                        ladder_name(rung) + ") not found: " + it->second.checkpoint.string());
        }
    }
    for (const auto& [rung, art] : rungs) {
        if (rung < 1 || rung > 4) {
            throw std::invalid_argument("ablation: unknown rung " + std::to_string(rung));
        }
    }

    AblationReport report;
    std::vector<Series> curves;
    for (int rung = 1; rung <= 4; ++rung) {
        const RungArtifacts& art = rungs.at(rung);
        Checkpoint ck;
        try {
            ck = load_checkpoint(art.checkpoint);
        } catch (const std::exception& e) {
            throw std::invalid_argument("ablation: rung " + std::to_string(rung) + " (" + ladder_name(rung) +
                                        "): " + e.what());
        }
        const EmbeddingMatrix e = embed_signals(probe_set, ck.params, ck.config.encoder);
        const ProbeResult r = evaluate_classification(e, cfg, "rhythm-3class");
        report.rows.push_back({rung, ladder_name(rung), r.metrics});
        if (!art.losses_csv.empty()) {
            Series s{ladder_name(rung), {}};
            for (const LossReport& l : read_loss_csv(art.losses_csv)) {
                s.y.push_back(l.total);
            }
            curves.push_back(std::move(s));
        }
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        report.write_csv(out_dir / "ablation.csv");
        write_text_file(out_dir / "loss_curves.svg",
                        line_chart_svg(curves, "Pretraining loss per ladder rung", "step", "total loss"));
    }
    return report;
}

}  // namespace nerula
