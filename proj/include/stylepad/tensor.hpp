#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace stylepad {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major float64 tensor with reverse-mode autodiff. A Tensor is a
// cheap handle to a graph node; ops record parents and a backward closure
// while grad mode is on. Values are treated as immutable once produced by an
// op; optimizer updates go through data() on leaves only.
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;  // leaves: persistent, accumulated; interior: scratch
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;  // pushes node.grad into parents' grads
        int64_t numel() const { return static_cast<int64_t>(value.size()); }
        bool is_leaf() const { return parents.empty(); }
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double v, bool requires_grad = false);
    static Tensor from_data(const Shape& shape, std::vector<double> data,
                            bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<double>& data() const { return node_->value; }
    std::vector<double>& data() { return node_->value; }
    std::vector<double>& grad();              // allocates zeros on first use
    const std::vector<double>& grad() const;
    void zero_grad();
    double item() const;                      // scalar tensors only

    // Throws if any stored value is NaN/Inf; `what` names the tensor in the error.
    void check_finite(const std::string& what) const;

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Grad mode: when off, ops compute values only and record no graph.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev); }
};

// Runs reverse-mode accumulation from a scalar loss. Leaf grads accumulate
// across calls; call zero_grads / Tensor::zero_grad between steps.
void backward(const Tensor& loss);

// ---- elementwise / shape ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // same shape, or b == [B,1,L] vs a == [B,C,L]
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor slice_lastdim(const Tensor& a, int64_t start, int64_t len);
Tensor concat_channels(const Tensor& a, const Tensor& b);    // [B,Ca,L] + [B,Cb,L]
Tensor concat_rows(const Tensor& a, const Tensor& b);        // [Ba,N] + [Bb,N]
Tensor transpose_12(const Tensor& a);                        // [A,B,C] -> [A,C,B]
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_lastdim(const Tensor& a);
Tensor add_rowvec(const Tensor& x, const Tensor& v);         // [B,N] + [N]
Tensor add_cond_bias(const Tensor& x, const Tensor& e);      // [B,C,L] + [B,C]

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T
Tensor bmm(const Tensor& a, const Tensor& b);        // [B,m,k] x [B,k,n]
Tensor bmm_nt(const Tensor& a, const Tensor& b);     // [B,m,k] x [B,n,k]^T

// ---- convolution / pooling ----
int64_t conv1d_out_len(int64_t L, int64_t k, int64_t stride, int64_t padding);
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int64_t stride, int64_t padding);
Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int64_t stride, int64_t padding, int64_t output_padding);
Tensor maxpool1d(const Tensor& input, int64_t k, int64_t stride);

// ---- nonlinearities / normalization ----
Tensor relu(const Tensor& a);
Tensor softmax_lastdim(const Tensor& a);
Tensor l2_normalize_rows(const Tensor& a, double eps = 1e-12);
Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   const std::vector<double>& mean, const std::vector<double>& var,
                   double eps);  // eval path: fixed statistics
Tensor batchnorm1d_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         std::vector<double>* batch_mean_out,
                         std::vector<double>* batch_var_out, double eps);
Tensor groupnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 int64_t groups, double eps);
Tensor layernorm_lastdim(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps);

// ---- losses ----
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// ---- fixed embeddings ----
// emb[2i] = sin(t * w_i), emb[2i+1] = cos(t * w_i), w_i = 10000^(-2i/dim).
std::vector<double> sinusoidal_timestep_embedding(int64_t t, int64_t dim);

}  // namespace stylepad
