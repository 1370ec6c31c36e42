#pragma once

#include <cstdint>

#include "nerula/autodiff.hpp"

namespace nerula {

struct LossWeights {
    double w_nce = 1.0;
    double w_recon = 10.0;
    double huber_delta = 1.0;

    void validate() const;
};

struct LossReport {
    double nce = 0.0;
    double recon = 0.0;
    double total = 0.0;
    std::int64_t step = 0;
};

/// Negative mean cosine similarity between matching rows of z_i and z_j [B x L].
/// Row norms are floored at `norm_floor`; with a floor of 0 a zero row is rejected.
Var cosine_nce_loss(const Var& z_i, const Var& z_j, double norm_floor = 1e-8);

/// Mean over all elements of the Huber penalty of e = y - y_hat.
Var huber_loss(const Var& y, const Var& y_hat, double delta);

/// Huber mean restricted to elements where `select` is nonzero.
Var huber_loss_selected(const Var& y, const Var& y_hat, double delta, const Array& select);

struct CombinedLoss {
    Var total;
    Var nce;
    Var recon;
    LossReport report;
};

/// total = w_nce * cosine_nce_loss(z_i, z_j) + w_recon * huber_loss(y, y_hat).
CombinedLoss combined_loss(const Var& z_i, const Var& z_j, const Var& y, const Var& y_hat,
                           const LossWeights& weights);

}  // namespace nerula
