#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nerula/array.hpp"

namespace nerula {

struct Node;

/// Handle to a node of the reverse-mode tape. Copies share the node.
///
/// A tape is built implicitly by calling ops on Vars and is discarded when the
/// last handle to its output goes away. Leaves created with `requires_grad`
/// accumulate gradient across successive `backward()` calls until `zero_grad()`.
class Var {
public:
    Var() = default;
    explicit Var(Array value, bool requires_grad = false);

    const Array& value() const;
    Array& mutable_value();
    const Array& grad() const;
    Array& mutable_grad();
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    bool defined() const noexcept { return static_cast<bool>(node_); }
    void zero_grad();

    /// Seeds d(this)/d(this) = 1 (scalars only) or `seed` and runs the backward pass.
    void backward();
    void backward(const Array& seed);

    Node* node() const noexcept { return node_.get(); }

    using BackwardFn = std::function<void(Node&)>;
    static Var from_op(Array value, std::vector<Var> parents, BackwardFn backward_fn);

private:
    std::shared_ptr<Node> node_;
};

struct Node {
    Array value;
    Array grad;  // empty until first written, then same shape as value
    std::vector<Var> parents;
    Var::BackwardFn backward_fn;
    bool requires_grad = false;
};

/// Constant (non-differentiable) wrapper.
inline Var constant(Array a) { return Var(std::move(a), false); }
/// Trainable leaf.
inline Var leaf(Array a) { return Var(std::move(a), true); }

}  // namespace nerula
