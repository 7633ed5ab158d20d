#include "stylepad/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace stylepad {

Tensor& ParameterSet::create(const std::string& name, Tensor t) {
    if (index_.count(name))
        throw std::invalid_argument("ParameterSet: duplicate parameter \"" + name + "\"");
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
}

Tensor& ParameterSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("ParameterSet: no parameter \"" + name + "\"");
    return items_[it->second].second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("ParameterSet: no parameter \"" + name + "\"");
    return items_[it->second].second;
}

bool ParameterSet::contains(const std::string& name) const { return index_.count(name) > 0; }

void ParameterSet::merge(const std::string& prefix, const ParameterSet& other) {
    for (const auto& [name, t] : other.items()) create(prefix + name, t);
}

int64_t ParameterSet::total_elements() const {
    int64_t n = 0;
    for (const auto& [_, t] : items_) n += t.numel();
    return n;
}

void reverse_gradient(const Tensor& loss, ParameterSet& params) {
    if (loss.numel() != 1)
        throw std::invalid_argument("reverse_gradient: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    for (auto& [name, t] : params.items()) t.grad();  // materialize zeros for disconnected params
    backward(loss);
}

void zero_grads(ParameterSet& params) {
    for (auto& [name, t] : params.items()) t.zero_grad();
}

AdamState make_adam(double lr, double beta1, double beta2, double eps) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
}

void adam_step(ParameterSet& params, AdamState& state) {
    state.t_opt += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t_opt));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t_opt));
    for (auto& [name, t] : params.items()) {
        if (t.node()->grad.empty())
            throw std::runtime_error("adam_step: parameter \"" + name + "\" has no gradient");
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(t.data().size(), 0.0);
        if (v.empty()) v.assign(t.data().size(), 0.0);
        if (m.size() != t.data().size())
            throw std::runtime_error("adam_step: moment shape mismatch for \"" + name + "\"");
        auto& w = t.data();
        const auto& g = t.grad();
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            double mh = m[i] / bc1;
            double vh = v[i] / bc2;
            w[i] -= state.lr * mh / (std::sqrt(vh) + state.eps);
        }
    }
}

}  // namespace stylepad
