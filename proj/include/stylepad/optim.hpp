#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stylepad/tensor.hpp"

namespace stylepad {

// Named trainable tensors with insertion-ordered, stable iteration.
class ParameterSet {
public:
    Tensor& create(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    size_t size() const { return items_.size(); }

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }

    // Absorbs every parameter of `other` under `prefix + name`.
    void merge(const std::string& prefix, const ParameterSet& other);

    int64_t total_elements() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::map<std::string, size_t> index_;
};

// Accumulating reverse pass: each param.grad gains d(loss)/d(param).
// Disconnected parameters keep their current (possibly zero) grads.
void reverse_gradient(const Tensor& loss, ParameterSet& params);
void zero_grads(ParameterSet& params);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t_opt = 0;
    // keyed by parameter name; shapes mirror the parameters
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
};

AdamState make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Standard Adam with bias correction. Grads are left untouched; the caller
// zeroes them between steps.
void adam_step(ParameterSet& params, AdamState& state);

}  // namespace stylepad
