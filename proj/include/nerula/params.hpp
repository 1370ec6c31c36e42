#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nerula/autodiff.hpp"

namespace nerula {

/// Ordered registry of trainable leaves, addressable by unique name.
/// Iteration order is insertion order; checkpoints rely on it.
class ParameterSet {
public:
    Var& add(std::string name, Array init);

    bool contains(std::string_view name) const;
    Var& get(std::string_view name);
    const Var& get(std::string_view name) const;

    std::size_t size() const noexcept { return vars_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    Var& at(std::size_t i) { return vars_.at(i); }
    const Var& at(std::size_t i) const { return vars_.at(i); }

    std::size_t element_count() const;
    void zero_grad();
    bool all_finite() const;

    /// Deep copy: fresh leaves with copied values and zero gradients.
    ParameterSet clone() const;

private:
    std::vector<std::string> names_;
    std::vector<Var> vars_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace nerula
