#include "nerula/optim.hpp"

#include <cmath>

namespace nerula {

void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& cfg) {
    if (state.first_moment.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.first_moment.emplace_back(params.at(i).shape(), 0.0);
            state.second_moment.emplace_back(params.at(i).shape(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw std::invalid_argument("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                    " arrays but there are " + std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.first_moment[i].shape() != params.at(i).shape()) {
            throw ShapeError("adam_step: moment shape mismatch for '" + params.names()[i] + "'");
        }
        if (!params.at(i).grad().all_finite()) {
            throw NonFiniteError("adam_step: non-finite gradient in parameter '" + params.names()[i] + "'");
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Var& p = params.at(i);
        const Array& g = p.grad();
        Array& w = p.mutable_value();
        Array& m = state.first_moment[i];
        Array& v = state.second_moment[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            w[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace nerula
