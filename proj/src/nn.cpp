#include "stylepad/nn.hpp"

#include <cmath>

namespace stylepad {

Tensor kaiming_uniform(const Shape& shape, int64_t fan_in, RngStream& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (double& x : v) x = (2.0 * rng.uniform() - 1.0) * bound;
    return Tensor::from_data(shape, std::move(v), true);
}

namespace {

Tensor bias_uniform(int64_t n, int64_t fan_in, RngStream& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = (2.0 * rng.uniform() - 1.0) * bound;
    return Tensor::from_data({n}, std::move(v), true);
}

}  // namespace

Linear::Linear(ParameterSet& params, const std::string& name, int64_t in, int64_t out,
               RngStream& rng) {
    w = params.create(name + ".w", kaiming_uniform({in, out}, in, rng));
    b = params.create(name + ".b", bias_uniform(out, in, rng));
}

Tensor Linear::forward(const Tensor& x) const { return add_rowvec(matmul(x, w), b); }

Conv1d::Conv1d(ParameterSet& params, const std::string& name, int64_t cin, int64_t cout,
               int64_t k, int64_t stride_, int64_t padding_, RngStream& rng)
    : stride(stride_), padding(padding_) {
    w = params.create(name + ".w", kaiming_uniform({cout, cin, k}, cin * k, rng));
    b = params.create(name + ".b", bias_uniform(cout, cin * k, rng));
}

Tensor Conv1d::forward(const Tensor& x) const { return conv1d(x, w, b, stride, padding); }

ConvTranspose1d::ConvTranspose1d(ParameterSet& params, const std::string& name, int64_t cin,
                                 int64_t cout, int64_t k, int64_t stride_, int64_t padding_,
                                 int64_t output_padding_, RngStream& rng)
    : stride(stride_), padding(padding_), output_padding(output_padding_) {
    w = params.create(name + ".w", kaiming_uniform({cin, cout, k}, cin * k, rng));
    b = params.create(name + ".b", bias_uniform(cout, cin * k, rng));
}

Tensor ConvTranspose1d::forward(const Tensor& x) const {
    return conv_transpose1d(x, w, b, stride, padding, output_padding);
}

BatchNorm1d::BatchNorm1d(ParameterSet& params, ParameterSet& buffers, const std::string& name,
                         int64_t c) {
    gamma = params.create(name + ".gamma", Tensor::full({c}, 1.0, true));
    beta = params.create(name + ".beta", Tensor::zeros({c}, true));
    running_mean = buffers.create(name + ".running_mean", Tensor::zeros({c}));
    running_var = buffers.create(name + ".running_var", Tensor::full({c}, 1.0));
}

Tensor BatchNorm1d::forward(const Tensor& x, bool training) {
    if (!training) return batchnorm1d(x, gamma, beta, running_mean.data(), running_var.data(), eps);
    std::vector<double> bm, bv;
    Tensor y = batchnorm1d_train(x, gamma, beta, &bm, &bv, eps);
    auto& rm = running_mean.data();
    auto& rv = running_var.data();
    for (size_t i = 0; i < rm.size(); ++i) {
        rm[i] = (1.0 - momentum) * rm[i] + momentum * bm[i];
        rv[i] = (1.0 - momentum) * rv[i] + momentum * bv[i];
    }
    return y;
}

GroupNorm::GroupNorm(ParameterSet& params, const std::string& name, int64_t c) {
    groups = std::min<int64_t>(8, c);
    while (c % groups != 0) --groups;
    gamma = params.create(name + ".gamma", Tensor::full({c}, 1.0, true));
    beta = params.create(name + ".beta", Tensor::zeros({c}, true));
}

Tensor GroupNorm::forward(const Tensor& x) const { return groupnorm(x, gamma, beta, groups, eps); }

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, int64_t n) {
    gamma = params.create(name + ".gamma", Tensor::full({n}, 1.0, true));
    beta = params.create(name + ".beta", Tensor::zeros({n}, true));
}

Tensor LayerNorm::forward(const Tensor& x) const {
    return layernorm_lastdim(x, gamma, beta, eps);
}

TransformerLayer::TransformerLayer(ParameterSet& params, const std::string& name, int64_t f_,
                                   int64_t f_hidden, RngStream& rng)
    : f(f_) {
    wq = Linear(params, name + ".wq", f, f, rng);
    wk = Linear(params, name + ".wk", f, f, rng);
    wv = Linear(params, name + ".wv", f, f, rng);
    wo = Linear(params, name + ".wo", f, f, rng);
    mlp1 = Linear(params, name + ".mlp1", f, f_hidden, rng);
    mlp2 = Linear(params, name + ".mlp2", f_hidden, f, rng);
    ln1 = LayerNorm(params, name + ".ln1", f);
    ln2 = LayerNorm(params, name + ".ln2", f);
}

Tensor TransformerLayer::forward(const Tensor& x) const {
    int64_t B = x.dim(0), T = x.dim(1);
    Tensor flat = reshape(x, {B * T, f});
    Tensor q = reshape(wq.forward(flat), {B, T, f});
    Tensor k = reshape(wk.forward(flat), {B, T, f});
    Tensor v = reshape(wv.forward(flat), {B, T, f});
    Tensor att = softmax_lastdim(scale(bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(f))));
    Tensor ctx = reshape(bmm(att, v), {B * T, f});
    Tensor h = ln1.forward(add(flat, wo.forward(ctx)));
    Tensor m = mlp2.forward(relu(mlp1.forward(h)));
    return reshape(ln2.forward(add(h, m)), {B, T, f});
}

AttentionPool::AttentionPool(ParameterSet& params, const std::string& name, int64_t f, int64_t h,
                             RngStream& rng) {
    score = Conv1d(params, name + ".score", f, 1, 1, 1, 0, rng);
    out = Linear(params, name + ".out", f, h, rng);
}

Tensor AttentionPool::forward(const Tensor& x) const {
    Tensor weights = softmax_lastdim(score.forward(x));   // [B, 1, T]
    Tensor pooled = sum_lastdim(mul(x, weights));         // [B, F]
    return out.forward(pooled);
}

}  // namespace stylepad
