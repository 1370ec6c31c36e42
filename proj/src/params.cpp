#include "nerula/params.hpp"

#include <stdexcept>

namespace nerula {

Var& ParameterSet::add(std::string name, Array init) {
    if (index_.contains(name)) {
        throw std::invalid_argument("duplicate parameter name '" + name + "'");
    }
    index_.emplace(name, vars_.size());
    names_.push_back(std::move(name));
    vars_.push_back(leaf(std::move(init)));
    return vars_.back();
}

bool ParameterSet::contains(std::string_view name) const { return index_.contains(std::string(name)); }

Var& ParameterSet::get(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) {
        throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
    }
    return vars_[it->second];
}

const Var& ParameterSet::get(std::string_view name) const {
    return const_cast<ParameterSet*>(this)->get(name);
}

std::size_t ParameterSet::element_count() const {
    std::size_t n = 0;
    for (const auto& v : vars_) {
        n += v.value().size();
    }
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& v : vars_) {
        v.zero_grad();
    }
}

bool ParameterSet::all_finite() const {
    for (const auto& v : vars_) {
        if (!v.value().all_finite()) {
            return false;
        }
    }
    return true;
}

ParameterSet ParameterSet::clone() const {
    ParameterSet out;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        out.add(names_[i], vars_[i].value());
    }
    return out;
}

}  // namespace nerula
