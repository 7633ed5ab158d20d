#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stylepad/rng.hpp"
#include "stylepad/tensor.hpp"

namespace testutil {

inline stylepad::Tensor random_tensor(const stylepad::Shape& shape, stylepad::RngStream& rng,
                                      bool requires_grad = true, double scale = 1.0) {
    std::vector<double> v(static_cast<size_t>(stylepad::shape_numel(shape)));
    for (double& x : v) x = rng.normal() * scale;
    return stylepad::Tensor::from_data(shape, std::move(v), requires_grad);
}

// Central finite differences vs reverse-mode gradients. `loss_fn` must build a
// fresh graph from the given leaves on every call; it is evaluated under
// no-grad for the perturbed passes, so the check is independent of the tape.
struct GradCheck {
    double max_rel_err = 0.0;
    std::string worst;  // "tensor_idx[flat]"
};

inline GradCheck finite_diff_check(const std::function<stylepad::Tensor()>& loss_fn,
                                   std::vector<stylepad::Tensor> leaves, double h = 1e-5) {
    using namespace stylepad;
    Tensor loss = loss_fn();
    for (auto& t : leaves) t.zero_grad();
    backward(loss);
    GradCheck res;
    for (size_t ti = 0; ti < leaves.size(); ++ti) {
        Tensor& t = leaves[ti];
        std::vector<double> ad = t.grad();
        for (size_t i = 0; i < t.data().size(); ++i) {
            double orig = t.data()[i];
            double fplus, fminus;
            {
                NoGradGuard ng;
                t.data()[i] = orig + h;
                fplus = loss_fn().item();
                t.data()[i] = orig - h;
                fminus = loss_fn().item();
                t.data()[i] = orig;
            }
            double fd = (fplus - fminus) / (2.0 * h);
            double denom = std::max({std::abs(ad[i]), std::abs(fd), 1e-3});
            double rel = std::abs(ad[i] - fd) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = std::to_string(ti) + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace testutil
