#include "nerula/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nerula/ops.hpp"

namespace nerula {

void LossWeights::validate() const {
    if (!(w_nce >= 0.0) || !(w_recon >= 0.0)) {
        throw std::invalid_argument("loss weights must be >= 0");
    }
    if (!(huber_delta > 0.0)) {
        throw std::invalid_argument("huber delta must be > 0");
    }
}

Var cosine_nce_loss(const Var& z_i, const Var& z_j, double norm_floor) {
    if (z_i.shape() != z_j.shape() || z_i.value().rank() != 2) {
        throw ShapeError("cosine_nce_loss: expected matching [B x L] inputs, got " + to_string(z_i.shape()) +
                         " and " + to_string(z_j.shape()));
    }
    const std::size_t batch = z_i.shape()[0];
    const std::size_t dim = z_i.shape()[1];
    const Array& a = z_i.value();
    const Array& b = z_j.value();
    std::vector<double> na(batch), nb(batch), cos(batch);
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        double dot = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            dot += a(r, c) * b(r, c);
            aa += a(r, c) * a(r, c);
            bb += b(r, c) * b(r, c);
        }
        const double ra = std::sqrt(aa);
        const double rb = std::sqrt(bb);
        if (norm_floor <= 0.0 && (ra == 0.0 || rb == 0.0)) {
            throw std::invalid_argument("cosine_nce_loss: row " + std::to_string(r) +
                                        " has zero norm and no norm floor is set");
        }
        na[r] = std::max(ra, norm_floor);
        nb[r] = std::max(rb, norm_floor);
        cos[r] = dot / (na[r] * nb[r]);
        total += cos[r];
    }
    const double inv_b = 1.0 / static_cast<double>(batch);
    return Var::from_op(Array::scalar(-total * inv_b), {z_i, z_j},
                        [na, nb, cos, batch, dim, norm_floor, inv_b](Node& self) {
                            const double g = -self.grad[0] * inv_b;
                            const Array& a = self.parents[0].value();
                            const Array& b = self.parents[1].value();
                            for (std::size_t side = 0; side < 2; ++side) {
                                Var& p = self.parents[side];
                                if (!p.requires_grad()) {
                                    continue;
                                }
                                const Array& self_v = side == 0 ? a : b;
                                const Array& other = side == 0 ? b : a;
                                const std::vector<double>& ns = side == 0 ? na : nb;
                                const std::vector<double>& no = side == 0 ? nb : na;
                                Array& grad = p.mutable_grad();
                                for (std::size_t r = 0; r < batch; ++r) {
                                    // Inside the floor the norm is constant, so only the dot term remains.
                                    const bool floored = ns[r] <= norm_floor;
                                    for (std::size_t c = 0; c < dim; ++c) {
                                        double d = other(r, c) / (ns[r] * no[r]);
                                        if (!floored) {
                                            d -= cos[r] * self_v(r, c) / (ns[r] * ns[r]);
                                        }
                                        grad(r, c) += g * d;
                                    }
                                }
                            }
                        });
}

namespace {

Var huber_impl(const Var& y, const Var& y_hat, double delta, const Array* select) {
    if (y.shape() != y_hat.shape()) {
        throw ShapeError("huber_loss: shapes " + to_string(y.shape()) + " and " + to_string(y_hat.shape()) +
                         " differ");
    }
    if (!(delta > 0.0)) {
        throw std::invalid_argument("huber_loss: delta must be > 0");
    }
    const std::size_t n = y.value().size();
    if (select && select->size() != n) {
        throw ShapeError("huber_loss_selected: selection " + to_string(select->shape()) + " does not match " +
                         to_string(y.shape()));
    }
    std::vector<double> weight(n, 1.0);
    double count = static_cast<double>(n);
    if (select) {
        count = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            weight[i] = (*select)[i] != 0.0 ? 1.0 : 0.0;
            count += weight[i];
        }
        if (count == 0.0) {
            throw std::invalid_argument("huber_loss_selected: selection is empty");
        }
    }
    double total = 0.0;
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y.value()[i] - y_hat.value()[i];
        const double ae = std::abs(e);
        const double l = ae <= delta ? 0.5 * e * e : delta * (ae - 0.5 * delta);
        psi[i] = weight[i] * (ae <= delta ? e : (e > 0 ? delta : -delta));
        total += weight[i] * l;
    }
    const double inv = 1.0 / count;
    return Var::from_op(Array::scalar(total * inv), {y, y_hat}, [psi = std::move(psi), inv](Node& self) {
        const double g = self.grad[0] * inv;
        for (std::size_t side = 0; side < 2; ++side) {
            Var& p = self.parents[side];
            if (!p.requires_grad()) {
                continue;
            }
            const double sign = side == 0 ? 1.0 : -1.0;
            Array& grad = p.mutable_grad();
            for (std::size_t i = 0; i < psi.size(); ++i) {
                grad[i] += sign * g * psi[i];
            }
        }
    });
}

}  // namespace

Var huber_loss(const Var& y, const Var& y_hat, double delta) { return huber_impl(y, y_hat, delta, nullptr); }

Var huber_loss_selected(const Var& y, const Var& y_hat, double delta, const Array& select) {
    return huber_impl(y, y_hat, delta, &select);
}

CombinedLoss combined_loss(const Var& z_i, const Var& z_j, const Var& y, const Var& y_hat,
                           const LossWeights& weights) {
    weights.validate();
    CombinedLoss out;
    out.nce = cosine_nce_loss(z_i, z_j);
    out.recon = huber_loss(y, y_hat, weights.huber_delta);
    out.total = add(scale(out.nce, weights.w_nce), scale(out.recon, weights.w_recon));
    out.report.nce = out.nce.value().item();
    out.report.recon = out.recon.value().item();
    out.report.total = out.total.value().item();
    return out;
}

}  // namespace nerula
