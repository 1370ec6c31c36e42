#include "nerula/autodiff.hpp"

#include <unordered_set>
#include <utility>

namespace nerula {

Var::Var(Array value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

const Array& Var::value() const { return node_->value; }
Array& Var::mutable_value() { return node_->value; }
// Gradient storage is allocated on first use.
const Array& Var::grad() const {
    if (node_->grad.empty()) {
        node_->grad = Array(node_->value.shape(), 0.0);
    }
    return node_->grad;
}
Array& Var::mutable_grad() {
    if (node_->grad.empty()) {
        node_->grad = Array(node_->value.shape(), 0.0);
    }
    return node_->grad;
}
bool Var::requires_grad() const { return node_->requires_grad; }
void Var::zero_grad() {
    if (!node_->grad.empty()) {
        node_->grad.fill(0.0);
    }
}

Var Var::from_op(Array value, std::vector<Var> parents, BackwardFn backward_fn) {
    Var out(std::move(value), false);
    for (const auto& p : parents) {
        if (p.requires_grad()) {
            out.node_->requires_grad = true;
            break;
        }
    }
    if (out.node_->requires_grad) {
        out.node_->parents = std::move(parents);
        out.node_->backward_fn = std::move(backward_fn);
    }
    return out;
}

void Var::backward() {
    if (value().size() != 1) {
        throw ShapeError("backward() without a seed needs a scalar output, got " + to_string(shape()));
    }
    backward(Array(shape(), 1.0));
}

void Var::backward(const Array& seed) {
    if (seed.shape() != shape()) {
        throw ShapeError("backward seed shape " + to_string(seed.shape()) + " != output shape " +
                         to_string(shape()));
    }
    if (!requires_grad()) {
        return;
    }

    // Iterative post-order DFS gives a topological order; each node appears once.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].node();
            if (p->requires_grad && visited.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    auto& g = mutable_grad().values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += seed[i];
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        // A node that received no gradient contributes nothing upstream.
        if ((*it)->backward_fn && !(*it)->grad.empty()) {
            (*it)->backward_fn(**it);
        }
    }
}

}  // namespace nerula
