#include "nerula/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nerula/rng.hpp"

namespace nerula {

namespace {

double rel_error(double a, double n, double floor) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

void validate(const FdOptions& opts) {
    if (!(opts.eps >= 1e-7 && opts.eps <= 1e-3)) {
        throw std::invalid_argument("fd_check: eps must lie in [1e-7, 1e-3]");
    }
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t limit) {
    std::vector<std::size_t> idx;
    if (limit == 0 || limit >= n) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = i;
        }
        return idx;
    }
    for (std::size_t k = 0; k < limit; ++k) {
        idx.push_back(k * n / limit);
    }
    return idx;
}

void record(FdReport& rep, std::size_t input, std::size_t elem, double a, double n, double floor) {
    const double e = rel_error(a, n, floor);
    ++rep.checked;
    if (e > rep.max_rel_error || !std::isfinite(e)) {
        rep.max_rel_error = std::isfinite(e) ? e : INFINITY;
        rep.worst_input = input;
        rep.worst_element = elem;
        rep.analytic = a;
        rep.numeric = n;
    }
}

}  // namespace

FdReport fd_check(const DiffOp& op, std::span<const Array> inputs, const FdOptions& opts) {
    validate(opts);
    for (const auto& a : inputs) {
        if (!a.all_finite()) {
            throw std::invalid_argument("fd_check: inputs must be finite");
        }
    }

    std::vector<Var> leaves;
    for (const auto& a : inputs) {
        leaves.push_back(leaf(a));
    }
    Var y = op(leaves);
    RngStream rng(opts.projection_seed);
    Array proj(y.shape());
    for (auto& v : proj.values()) {
        v = rng.uniform(-1.0, 1.0);
    }
    y.backward(proj);

    auto eval = [&](const std::vector<Array>& xs) {
        std::vector<Var> vs;
        for (const auto& a : xs) {
            vs.push_back(constant(a));
        }
        return op(vs).value();
    };

    FdReport rep;
    std::vector<Array> work(inputs.begin(), inputs.end());
    for (std::size_t i = 0; i < work.size(); ++i) {
        for (std::size_t j : probe_indices(work[i].size(), opts.max_elements_per_input)) {
            const double orig = work[i][j];
            work[i][j] = orig + opts.eps;
            const Array up = eval(work);
            work[i][j] = orig - opts.eps;
            const Array down = eval(work);
            work[i][j] = orig;
            // Difference the outputs before reducing to limit cancellation.
            double s = 0.0;
            for (std::size_t k = 0; k < up.size(); ++k) {
                s += proj[k] * (up[k] - down[k]);
            }
            record(rep, i, j, leaves[i].grad()[j], s / (2.0 * opts.eps), opts.floor);
        }
    }
    return rep;
}

FdReport fd_check_params(const std::function<Var()>& loss, ParameterSet& params, const FdOptions& opts) {
    validate(opts);
    params.zero_grad();
    Var l = loss();
    if (l.value().size() != 1) {
        throw ShapeError("fd_check_params: loss must be a scalar, got " + to_string(l.shape()));
    }
    l.backward();

    FdReport rep;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Var& p = params.at(i);
        const Array analytic = p.grad();
        for (std::size_t j : probe_indices(p.value().size(), opts.max_elements_per_input)) {
            double& w = p.mutable_value()[j];
            const double orig = w;
            w = orig + opts.eps;
            const double up = loss().value().item();
            w = orig - opts.eps;
            const double down = loss().value().item();
            w = orig;
            record(rep, i, j, analytic[j], (up - down) / (2.0 * opts.eps), opts.floor);
        }
    }
    params.zero_grad();
    return rep;
}

}  // namespace nerula
