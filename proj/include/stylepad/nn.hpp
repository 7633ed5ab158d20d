#pragma once

#include <cstdint>
#include <string>

#include "stylepad/optim.hpp"
#include "stylepad/rng.hpp"
#include "stylepad/tensor.hpp"

namespace stylepad {

// Layers register trainable tensors into a ParameterSet (and non-trainable
// state into a buffer set) under a dotted name prefix, then keep handles.
// Rebuilding a model with the same construction order reproduces the same
// parameter names, which is what checkpoint loading relies on.

Tensor kaiming_uniform(const Shape& shape, int64_t fan_in, RngStream& rng);

struct Linear {
    Tensor w;  // [in, out]
    Tensor b;  // [out]
    Linear() = default;
    Linear(ParameterSet& params, const std::string& name, int64_t in, int64_t out,
           RngStream& rng);
    Tensor forward(const Tensor& x) const;  // [B, in] -> [B, out]
};

struct Conv1d {
    Tensor w;  // [Cout, Cin, k]
    Tensor b;  // [Cout]
    int64_t stride = 1;
    int64_t padding = 0;
    Conv1d() = default;
    Conv1d(ParameterSet& params, const std::string& name, int64_t cin, int64_t cout, int64_t k,
           int64_t stride, int64_t padding, RngStream& rng);
    Tensor forward(const Tensor& x) const;
};

struct ConvTranspose1d {
    Tensor w;  // [Cin, Cout, k]
    Tensor b;  // [Cout]
    int64_t stride = 1;
    int64_t padding = 0;
    int64_t output_padding = 0;
    ConvTranspose1d() = default;
    ConvTranspose1d(ParameterSet& params, const std::string& name, int64_t cin, int64_t cout,
                    int64_t k, int64_t stride, int64_t padding, int64_t output_padding,
                    RngStream& rng);
    Tensor forward(const Tensor& x) const;
};

struct BatchNorm1d {
    Tensor gamma, beta;
    Tensor running_mean, running_var;  // buffers
    double momentum = 0.1;
    double eps = 1e-5;
    BatchNorm1d() = default;
    BatchNorm1d(ParameterSet& params, ParameterSet& buffers, const std::string& name, int64_t c);
    Tensor forward(const Tensor& x, bool training);
};

struct GroupNorm {
    Tensor gamma, beta;
    int64_t groups = 1;
    double eps = 1e-5;
    GroupNorm() = default;
    GroupNorm(ParameterSet& params, const std::string& name, int64_t c);
    Tensor forward(const Tensor& x) const;
};

struct LayerNorm {
    Tensor gamma, beta;
    double eps = 1e-5;
    LayerNorm() = default;
    LayerNorm(ParameterSet& params, const std::string& name, int64_t n);
    Tensor forward(const Tensor& x) const;  // normalizes the last dim
};

// Single-head self-attention block over [B, T, F] with a post-norm residual MLP.
struct TransformerLayer {
    Linear wq, wk, wv, wo;
    Linear mlp1, mlp2;
    LayerNorm ln1, ln2;
    int64_t f = 0;
    TransformerLayer() = default;
    TransformerLayer(ParameterSet& params, const std::string& name, int64_t f, int64_t f_hidden,
                     RngStream& rng);
    Tensor forward(const Tensor& x) const;  // [B, T, F] -> [B, T, F]
};

// Learned softmax pooling over time: [B, F, T] -> [B, H].
struct AttentionPool {
    Conv1d score;  // F -> 1, k=1
    Linear out;    // F -> H
    AttentionPool() = default;
    AttentionPool(ParameterSet& params, const std::string& name, int64_t f, int64_t h,
                  RngStream& rng);
    Tensor forward(const Tensor& x) const;
};

}  // namespace stylepad
