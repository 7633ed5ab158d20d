#include "stylepad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace stylepad {

namespace {

thread_local bool g_grad_enabled = true;

using Node = Tensor::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr new_node(Shape shape, std::vector<double> value) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (!g_grad_enabled) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void attach(const NodePtr& out, std::initializer_list<const Tensor*> inputs,
            std::function<void(Node&)> fn) {
    out->requires_grad = true;
    for (const Tensor* t : inputs) out->parents.push_back(t->node());
    out->backward = std::move(fn);
}

void ensure_grad(Node& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(op + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

void require_rank(const std::string& op, const Tensor& t, int rank) {
    if (t.rank() != rank)
        throw std::invalid_argument(op + ": expected rank " + std::to_string(rank) +
                                    ", got shape " + shape_str(t.shape()));
}

}  // namespace

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    auto n = new_node(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), 0.0));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(const Shape& shape, double v, bool requires_grad) {
    auto n = new_node(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), v));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("Tensor::from_data: " + shape_str(shape) + " needs " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(data.size()));
    auto n = new_node(shape, std::move(data));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

std::vector<double>& Tensor::grad() {
    ensure_grad(*node_);
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    ensure_grad(*node_);
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

double Tensor::item() const {
    if (numel() != 1)
        throw std::invalid_argument("Tensor::item: tensor has shape " + shape_str(shape()));
    return node_->value[0];
}

void Tensor::check_finite(const std::string& what) const {
    for (size_t i = 0; i < node_->value.size(); ++i) {
        if (!std::isfinite(node_->value[i]))
            throw std::domain_error(what + ": non-finite value at flat index " +
                                    std::to_string(i));
    }
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    // Iterative topological order over the recorded graph.
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* n;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.node().get(), 0});
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node* p = f.n->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.n);
            stack.pop_back();
        }
    }
    // Interior grads are scratch per backward pass; leaf grads accumulate.
    for (Node* n : topo) {
        if (n->is_leaf()) {
            ensure_grad(*n);
        } else {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    loss.node()->grad[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

// ---------------------------------------------------------------------------
// elementwise / shape
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a, b);
    std::vector<double> v(a.data());
    const auto& bv = b.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] += bv[i];
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        attach(out, {&a, &b}, [pa, pb](Node& n) {
            if (pa->requires_grad) {
                ensure_grad(*pa);
                for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
            }
            if (pb->requires_grad) {
                ensure_grad(*pb);
                for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i];
            }
        });
    }
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("sub", a, b);
    std::vector<double> v(a.data());
    const auto& bv = b.data();
    for (size_t i = 0; i < v.size(); ++i) v[i] -= bv[i];
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        attach(out, {&a, &b}, [pa, pb](Node& n) {
            if (pa->requires_grad) {
                ensure_grad(*pa);
                for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
            }
            if (pb->requires_grad) {
                ensure_grad(*pb);
                for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
            }
        });
    }
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    bool bc = false;  // b broadcast as [B,1,L] against a [B,C,L]
    if (a.shape() != b.shape()) {
        if (a.rank() == 3 && b.rank() == 3 && b.dim(1) == 1 && a.dim(0) == b.dim(0) &&
            a.dim(2) == b.dim(2)) {
            bc = true;
        } else {
            shape_error("mul", a, b);
        }
    }
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<double> v(av.size());
    if (!bc) {
        for (size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
    } else {
        int64_t B = a.dim(0), C = a.dim(1), L = a.dim(2);
        for (int64_t bi = 0; bi < B; ++bi)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t l = 0; l < L; ++l)
                    v[static_cast<size_t>((bi * C + c) * L + l)] =
                        av[static_cast<size_t>((bi * C + c) * L + l)] *
                        bv[static_cast<size_t>(bi * L + l)];
    }
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        Shape ash = a.shape();
        attach(out, {&a, &b}, [pa, pb, bc, ash](Node& n) {
            if (!bc) {
                if (pa->requires_grad) {
                    ensure_grad(*pa);
                    for (size_t i = 0; i < n.grad.size(); ++i)
                        pa->grad[i] += n.grad[i] * pb->value[i];
                }
                if (pb->requires_grad) {
                    ensure_grad(*pb);
                    for (size_t i = 0; i < n.grad.size(); ++i)
                        pb->grad[i] += n.grad[i] * pa->value[i];
                }
            } else {
                int64_t B = ash[0], C = ash[1], L = ash[2];
                if (pa->requires_grad) {
                    ensure_grad(*pa);
                    for (int64_t bi = 0; bi < B; ++bi)
                        for (int64_t c = 0; c < C; ++c)
                            for (int64_t l = 0; l < L; ++l)
                                pa->grad[static_cast<size_t>((bi * C + c) * L + l)] +=
                                    n.grad[static_cast<size_t>((bi * C + c) * L + l)] *
                                    pb->value[static_cast<size_t>(bi * L + l)];
                }
                if (pb->requires_grad) {
                    ensure_grad(*pb);
                    for (int64_t bi = 0; bi < B; ++bi)
                        for (int64_t c = 0; c < C; ++c)
                            for (int64_t l = 0; l < L; ++l)
                                pb->grad[static_cast<size_t>(bi * L + l)] +=
                                    n.grad[static_cast<size_t>((bi * C + c) * L + l)] *
                                    pa->value[static_cast<size_t>((bi * C + c) * L + l)];
                }
            }
        });
    }
    return Tensor(out);
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.data());
    for (double& x : v) x *= c;
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa, c](Node& n) {
            ensure_grad(*pa);
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += c * n.grad[i];
        });
    }
    return Tensor(out);
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> v(a.data());
    for (double& x : v) x += c;
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa](Node& n) {
            ensure_grad(*pa);
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        });
    }
    return Tensor(out);
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_numel(shape) != a.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    auto out = new_node(shape, a.data());
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa](Node& n) {
            ensure_grad(*pa);
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        });
    }
    return Tensor(out);
}

Tensor slice_lastdim(const Tensor& a, int64_t start, int64_t len) {
    int64_t L = a.shape().back();
    if (start < 0 || len < 1 || start + len > L)
        throw std::invalid_argument("slice_lastdim: [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of range for L=" +
                                    std::to_string(L));
    int64_t outer = a.numel() / L;
    Shape os = a.shape();
    os.back() = len;
    std::vector<double> v(static_cast<size_t>(outer * len));
    const auto& av = a.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t l = 0; l < len; ++l)
            v[static_cast<size_t>(o * len + l)] = av[static_cast<size_t>(o * L + start + l)];
    auto out = new_node(os, std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa, outer, len, L, start](Node& n) {
            ensure_grad(*pa);
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t l = 0; l < len; ++l)
                    pa->grad[static_cast<size_t>(o * L + start + l)] +=
                        n.grad[static_cast<size_t>(o * len + l)];
        });
    }
    return Tensor(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank("concat_channels", a, 3);
    require_rank("concat_channels", b, 3);
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) shape_error("concat_channels", a, b);
    int64_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), L = a.dim(2);
    std::vector<double> v(static_cast<size_t>(B * (Ca + Cb) * L));
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int64_t bi = 0; bi < B; ++bi) {
        std::copy(av.begin() + bi * Ca * L, av.begin() + (bi + 1) * Ca * L,
                  v.begin() + bi * (Ca + Cb) * L);
        std::copy(bv.begin() + bi * Cb * L, bv.begin() + (bi + 1) * Cb * L,
                  v.begin() + bi * (Ca + Cb) * L + Ca * L);
    }
    auto out = new_node({B, Ca + Cb, L}, std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        attach(out, {&a, &b}, [pa, pb, B, Ca, Cb, L](Node& n) {
            if (pa->requires_grad) {
                ensure_grad(*pa);
                for (int64_t bi = 0; bi < B; ++bi)
                    for (int64_t i = 0; i < Ca * L; ++i)
                        pa->grad[static_cast<size_t>(bi * Ca * L + i)] +=
                            n.grad[static_cast<size_t>(bi * (Ca + Cb) * L + i)];
            }
            if (pb->requires_grad) {
                ensure_grad(*pb);
                for (int64_t bi = 0; bi < B; ++bi)
                    for (int64_t i = 0; i < Cb * L; ++i)
                        pb->grad[static_cast<size_t>(bi * Cb * L + i)] +=
                            n.grad[static_cast<size_t>(bi * (Ca + Cb) * L + Ca * L + i)];
            }
        });
    }
    return Tensor(out);
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    require_rank("concat_rows", a, 2);
    require_rank("concat_rows", b, 2);
    if (a.dim(1) != b.dim(1)) shape_error("concat_rows", a, b);
    int64_t Ba = a.dim(0), Bb = b.dim(0), N = a.dim(1);
    std::vector<double> v;
    v.reserve(static_cast<size_t>((Ba + Bb) * N));
    v.insert(v.end(), a.data().begin(), a.data().end());
    v.insert(v.end(), b.data().begin(), b.data().end());
    auto out = new_node({Ba + Bb, N}, std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        int64_t na = Ba * N;
        attach(out, {&a, &b}, [pa, pb, na](Node& n) {
            if (pa->requires_grad) {
                ensure_grad(*pa);
                for (int64_t i = 0; i < na; ++i)
                    pa->grad[static_cast<size_t>(i)] += n.grad[static_cast<size_t>(i)];
            }
            if (pb->requires_grad) {
                ensure_grad(*pb);
                for (size_t i = static_cast<size_t>(na); i < n.grad.size(); ++i)
                    pb->grad[i - static_cast<size_t>(na)] += n.grad[i];
            }
        });
    }
    return Tensor(out);
}

Tensor transpose_12(const Tensor& a) {
    require_rank("transpose_12", a, 3);
    int64_t A = a.dim(0), B = a.dim(1), C = a.dim(2);
    std::vector<double> v(a.data().size());
    const auto& av = a.data();
    for (int64_t i = 0; i < A; ++i)
        for (int64_t j = 0; j < B; ++j)
            for (int64_t k = 0; k < C; ++k)
                v[static_cast<size_t>((i * C + k) * B + j)] =
                    av[static_cast<size_t>((i * B + j) * C + k)];
    auto out = new_node({A, C, B}, std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa, A, B, C](Node& n) {
            ensure_grad(*pa);
            for (int64_t i = 0; i < A; ++i)
                for (int64_t j = 0; j < B; ++j)
                    for (int64_t k = 0; k < C; ++k)
                        pa->grad[static_cast<size_t>((i * B + j) * C + k)] +=
                            n.grad[static_cast<size_t>((i * C + k) * B + j)];
        });
    }
    return Tensor(out);
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    auto out = new_node({1}, {s});
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa](Node& n) {
            ensure_grad(*pa);
            for (double& g : pa->grad) g += n.grad[0];
        });
    }
    return Tensor(out);
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    double inv = 1.0 / static_cast<double>(a.numel());
    auto out = new_node({1}, {s * inv});
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa, inv](Node& n) {
            ensure_grad(*pa);
            for (double& g : pa->grad) g += n.grad[0] * inv;
        });
    }
    return Tensor(out);
}

Tensor sum_lastdim(const Tensor& a) {
    int64_t L = a.shape().back();
    int64_t outer = a.numel() / L;
    Shape os(a.shape().begin(), a.shape().end() - 1);
    if (os.empty()) os = {1};
    std::vector<double> v(static_cast<size_t>(outer), 0.0);
    const auto& av = a.data();
    for (int64_t o = 0; o < outer; ++o) {
        double s = 0.0;
        for (int64_t l = 0; l < L; ++l) s += av[static_cast<size_t>(o * L + l)];
        v[static_cast<size_t>(o)] = s;
    }
    auto out = new_node(os, std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa, outer, L](Node& n) {
            ensure_grad(*pa);
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t l = 0; l < L; ++l)
                    pa->grad[static_cast<size_t>(o * L + l)] += n.grad[static_cast<size_t>(o)];
        });
    }
    return Tensor(out);
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    require_rank("add_rowvec", x, 2);
    require_rank("add_rowvec", v, 1);
    if (x.dim(1) != v.dim(0)) shape_error("add_rowvec", x, v);
    int64_t B = x.dim(0), N = x.dim(1);
    std::vector<double> out_v(x.data());
    const auto& vv = v.data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < N; ++i) out_v[static_cast<size_t>(b * N + i)] += vv[static_cast<size_t>(i)];
    auto out = new_node(x.shape(), std::move(out_v));
    if (tracking({&x, &v})) {
        Node* px = x.node().get();
        Node* pv = v.node().get();
        attach(out, {&x, &v}, [px, pv, B, N](Node& n) {
            if (px->requires_grad) {
                ensure_grad(*px);
                for (size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += n.grad[i];
            }
            if (pv->requires_grad) {
                ensure_grad(*pv);
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t i = 0; i < N; ++i)
                        pv->grad[static_cast<size_t>(i)] += n.grad[static_cast<size_t>(b * N + i)];
            }
        });
    }
    return Tensor(out);
}

Tensor add_cond_bias(const Tensor& x, const Tensor& e) {
    require_rank("add_cond_bias", x, 3);
    require_rank("add_cond_bias", e, 2);
    if (x.dim(0) != e.dim(0) || x.dim(1) != e.dim(1)) shape_error("add_cond_bias", x, e);
    int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    std::vector<double> v(x.data());
    const auto& ev = e.data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            double bias = ev[static_cast<size_t>(b * C + c)];
            for (int64_t l = 0; l < L; ++l) v[static_cast<size_t>((b * C + c) * L + l)] += bias;
        }
    auto out = new_node(x.shape(), std::move(v));
    if (tracking({&x, &e})) {
        Node* px = x.node().get();
        Node* pe = e.node().get();
        attach(out, {&x, &e}, [px, pe, B, C, L](Node& n) {
            if (px->requires_grad) {
                ensure_grad(*px);
                for (size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += n.grad[i];
            }
            if (pe->requires_grad) {
                ensure_grad(*pe);
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t c = 0; c < C; ++c) {
                        double s = 0.0;
                        for (int64_t l = 0; l < L; ++l)
                            s += n.grad[static_cast<size_t>((b * C + c) * L + l)];
                        pe->grad[static_cast<size_t>(b * C + c)] += s;
                    }
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

namespace {

// c[m,n] += a[m,k] * b[k,n]; raw kernels shared by matmul/bmm and their backwards.
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
    for (int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            const double* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m,n] += a[m,k] * b[n,k]^T
void mm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

// c[m,n] += a[k,m]^T * b[k,n]
void mm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
    for (int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            double av = a[p * m + i];
            const double* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    if (a.dim(1) != b.dim(0)) shape_error("matmul", a, b);
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> v(static_cast<size_t>(m * n), 0.0);
    mm_nn(a.data().data(), b.data().data(), v.data(), m, k, n);
    auto out = new_node({m, n}, std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        attach(out, {&a, &b}, [pa, pb, m, k, n](Node& nd) {
            if (pa->requires_grad) {
                ensure_grad(*pa);
                mm_nt(nd.grad.data(), pb->value.data(), pa->grad.data(), m, n, k);
            }
            if (pb->requires_grad) {
                ensure_grad(*pb);
                mm_tn(pa->value.data(), nd.grad.data(), pb->grad.data(), k, m, n);
            }
        });
    }
    return Tensor(out);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank("matmul_nt", a, 2);
    require_rank("matmul_nt", b, 2);
    if (a.dim(1) != b.dim(1)) shape_error("matmul_nt", a, b);
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    std::vector<double> v(static_cast<size_t>(m * n), 0.0);
    mm_nt(a.data().data(), b.data().data(), v.data(), m, k, n);
    auto out = new_node({m, n}, std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        attach(out, {&a, &b}, [pa, pb, m, k, n](Node& nd) {
            if (pa->requires_grad) {
                ensure_grad(*pa);
                mm_nn(nd.grad.data(), pb->value.data(), pa->grad.data(), m, n, k);
            }
            if (pb->requires_grad) {
                ensure_grad(*pb);
                mm_tn(nd.grad.data(), pa->value.data(), pb->grad.data(), n, m, k);
            }
        });
    }
    return Tensor(out);
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    require_rank("bmm", a, 3);
    require_rank("bmm", b, 3);
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) shape_error("bmm", a, b);
    int64_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    std::vector<double> v(static_cast<size_t>(B * m * n), 0.0);
    for (int64_t bi = 0; bi < B; ++bi)
        mm_nn(a.data().data() + bi * m * k, b.data().data() + bi * k * n, v.data() + bi * m * n,
              m, k, n);
    auto out = new_node({B, m, n}, std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        attach(out, {&a, &b}, [pa, pb, B, m, k, n](Node& nd) {
            for (int64_t bi = 0; bi < B; ++bi) {
                if (pa->requires_grad) {
                    ensure_grad(*pa);
                    mm_nt(nd.grad.data() + bi * m * n, pb->value.data() + bi * k * n,
                          pa->grad.data() + bi * m * k, m, n, k);
                }
                if (pb->requires_grad) {
                    ensure_grad(*pb);
                    mm_tn(pa->value.data() + bi * m * k, nd.grad.data() + bi * m * n,
                          pb->grad.data() + bi * k * n, k, m, n);
                }
            }
        });
    }
    return Tensor(out);
}

Tensor bmm_nt(const Tensor& a, const Tensor& b) {
    require_rank("bmm_nt", a, 3);
    require_rank("bmm_nt", b, 3);
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) shape_error("bmm_nt", a, b);
    int64_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
    std::vector<double> v(static_cast<size_t>(B * m * n), 0.0);
    for (int64_t bi = 0; bi < B; ++bi)
        mm_nt(a.data().data() + bi * m * k, b.data().data() + bi * n * k, v.data() + bi * m * n,
              m, k, n);
    auto out = new_node({B, m, n}, std::move(v));
    if (tracking({&a, &b})) {
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        attach(out, {&a, &b}, [pa, pb, B, m, k, n](Node& nd) {
            for (int64_t bi = 0; bi < B; ++bi) {
                if (pa->requires_grad) {
                    ensure_grad(*pa);
                    mm_nn(nd.grad.data() + bi * m * n, pb->value.data() + bi * n * k,
                          pa->grad.data() + bi * m * k, m, n, k);
                }
                if (pb->requires_grad) {
                    ensure_grad(*pb);
                    mm_tn(nd.grad.data() + bi * m * n, pa->value.data() + bi * m * k,
                          pb->grad.data() + bi * n * k, n, m, k);
                }
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// convolution / pooling
// ---------------------------------------------------------------------------

int64_t conv1d_out_len(int64_t L, int64_t k, int64_t stride, int64_t padding) {
    return (L + 2 * padding - k) / stride + 1;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int64_t stride,
              int64_t padding) {
    require_rank("conv1d", input, 3);
    require_rank("conv1d", weight, 3);
    require_rank("conv1d", bias, 1);
    int64_t B = input.dim(0), Cin = input.dim(1), L = input.dim(2);
    int64_t Cout = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != Cin)
        throw std::invalid_argument("conv1d: weight expects Cin=" + std::to_string(weight.dim(1)) +
                                    " but input has Cin=" + std::to_string(Cin));
    if (bias.dim(0) != Cout) shape_error("conv1d", weight, bias);
    if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
    if (k > L + 2 * padding)
        throw std::invalid_argument("conv1d: kernel " + std::to_string(k) +
                                    " exceeds padded length " + std::to_string(L + 2 * padding));
    int64_t Lp = conv1d_out_len(L, k, stride, padding);

    std::vector<double> v(static_cast<size_t>(B * Cout * Lp));
    const double* in = input.data().data();
    const double* w = weight.data().data();
    const double* bs = bias.data().data();
#pragma omp parallel for schedule(static) if (B > 1 && B * Cout * Lp * Cin * k > 16384)
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Cout; ++co) {
            double* orow = v.data() + (b * Cout + co) * Lp;
            for (int64_t lp = 0; lp < Lp; ++lp) orow[lp] = bs[co];
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const double* irow = in + (b * Cin + ci) * L;
                const double* wrow = w + (co * Cin + ci) * k;
                for (int64_t kk = 0; kk < k; ++kk) {
                    double wv = wrow[kk];
                    // valid output range: 0 <= lp*stride - padding + kk < L
                    int64_t lo = padding - kk <= 0 ? 0 : (padding - kk + stride - 1) / stride;
                    int64_t hi = (L - 1 + padding - kk) / stride;
                    if (hi >= Lp) hi = Lp - 1;
                    const double* ib = irow + kk - padding;
                    for (int64_t lp = lo; lp <= hi; ++lp) orow[lp] += wv * ib[lp * stride];
                }
            }
        }
    }
    auto out = new_node({B, Cout, Lp}, std::move(v));
    if (tracking({&input, &weight, &bias})) {
        Node* pi = input.node().get();
        Node* pw = weight.node().get();
        Node* pb = bias.node().get();
        attach(out, {&input, &weight, &bias},
               [pi, pw, pb, B, Cin, Cout, L, Lp, k, stride, padding](Node& nd) {
                   const double* g = nd.grad.data();
                   if (pi->requires_grad) {
                       ensure_grad(*pi);
                       double* gi = pi->grad.data();
                       const double* w = pw->value.data();
#pragma omp parallel for schedule(static) if (B > 1 && B * Cout * Lp * Cin * k > 16384)
                       for (int64_t b = 0; b < B; ++b)
                           for (int64_t co = 0; co < Cout; ++co) {
                               const double* grow = g + (b * Cout + co) * Lp;
                               for (int64_t ci = 0; ci < Cin; ++ci) {
                                   double* girow = gi + (b * Cin + ci) * L;
                                   const double* wrow = w + (co * Cin + ci) * k;
                                   for (int64_t kk = 0; kk < k; ++kk) {
                                       double wv = wrow[kk];
                                       int64_t lo = padding - kk <= 0
                                                        ? 0
                                                        : (padding - kk + stride - 1) / stride;
                                       int64_t hi = (L - 1 + padding - kk) / stride;
                                       if (hi >= Lp) hi = Lp - 1;
                                       double* gib = girow + kk - padding;
                                       for (int64_t lp = lo; lp <= hi; ++lp)
                                           gib[lp * stride] += wv * grow[lp];
                                   }
                               }
                           }
                   }
                   if (pw->requires_grad) {
                       ensure_grad(*pw);
                       double* gw = pw->grad.data();
                       const double* in = pi->value.data();
#pragma omp parallel for schedule(static) if (Cout > 1 && B * Cout * Lp * Cin * k > 16384)
                       for (int64_t co = 0; co < Cout; ++co)
                           for (int64_t b = 0; b < B; ++b) {
                               const double* grow = g + (b * Cout + co) * Lp;
                               for (int64_t ci = 0; ci < Cin; ++ci) {
                                   const double* irow = in + (b * Cin + ci) * L;
                                   double* gwrow = gw + (co * Cin + ci) * k;
                                   for (int64_t kk = 0; kk < k; ++kk) {
                                       int64_t lo = padding - kk <= 0
                                                        ? 0
                                                        : (padding - kk + stride - 1) / stride;
                                       int64_t hi = (L - 1 + padding - kk) / stride;
                                       if (hi >= Lp) hi = Lp - 1;
                                       const double* ib = irow + kk - padding;
                                       double s = 0.0;
                                       for (int64_t lp = lo; lp <= hi; ++lp)
                                           s += grow[lp] * ib[lp * stride];
                                       gwrow[kk] += s;
                                   }
                               }
                           }
                   }
                   if (pb->requires_grad) {
                       ensure_grad(*pb);
                       for (int64_t co = 0; co < Cout; ++co) {
                           double s = 0.0;
                           for (int64_t b = 0; b < B; ++b) {
                               const double* grow = g + (b * Cout + co) * Lp;
                               for (int64_t lp = 0; lp < Lp; ++lp) s += grow[lp];
                           }
                           pb->grad[static_cast<size_t>(co)] += s;
                       }
                   }
               });
    }
    return Tensor(out);
}

Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int64_t stride, int64_t padding, int64_t output_padding) {
    require_rank("conv_transpose1d", input, 3);
    require_rank("conv_transpose1d", weight, 3);  // [Cin, Cout, k]
    require_rank("conv_transpose1d", bias, 1);
    int64_t B = input.dim(0), Cin = input.dim(1), L = input.dim(2);
    int64_t Cout = weight.dim(1), k = weight.dim(2);
    if (weight.dim(0) != Cin)
        throw std::invalid_argument("conv_transpose1d: weight expects Cin=" +
                                    std::to_string(weight.dim(0)) + " but input has Cin=" +
                                    std::to_string(Cin));
    if (bias.dim(0) != Cout) shape_error("conv_transpose1d", weight, bias);
    if (output_padding >= stride)
        throw std::invalid_argument("conv_transpose1d: output_padding must be < stride");
    int64_t Lo = (L - 1) * stride - 2 * padding + k + output_padding;
    if (Lo < 1) throw std::invalid_argument("conv_transpose1d: non-positive output length");

    std::vector<double> v(static_cast<size_t>(B * Cout * Lo));
    const double* in = input.data().data();
    const double* w = weight.data().data();
    const double* bs = bias.data().data();
#pragma omp parallel for schedule(static) if (B > 1 && B * Cout * L * Cin * k > 16384)
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Cout; ++co) {
            double* orow = v.data() + (b * Cout + co) * Lo;
            for (int64_t l = 0; l < Lo; ++l) orow[l] = bs[co];
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const double* irow = in + (b * Cin + ci) * L;
                const double* wrow = w + (ci * Cout + co) * k;
                for (int64_t li = 0; li < L; ++li) {
                    double iv = irow[li];
                    int64_t base = li * stride - padding;
                    for (int64_t kk = 0; kk < k; ++kk) {
                        int64_t l = base + kk;
                        if (l >= 0 && l < Lo) orow[l] += iv * wrow[kk];
                    }
                }
            }
        }
    }
    auto out = new_node({B, Cout, Lo}, std::move(v));
    if (tracking({&input, &weight, &bias})) {
        Node* pi = input.node().get();
        Node* pw = weight.node().get();
        Node* pb = bias.node().get();
        attach(out, {&input, &weight, &bias},
               [pi, pw, pb, B, Cin, Cout, L, Lo, k, stride, padding](Node& nd) {
                   const double* g = nd.grad.data();
                   if (pi->requires_grad) {
                       ensure_grad(*pi);
                       double* gi = pi->grad.data();
                       const double* w = pw->value.data();
#pragma omp parallel for schedule(static) if (B > 1 && B * Cout * L * Cin * k > 16384)
                       for (int64_t b = 0; b < B; ++b)
                           for (int64_t ci = 0; ci < Cin; ++ci) {
                               double* girow = gi + (b * Cin + ci) * L;
                               for (int64_t co = 0; co < Cout; ++co) {
                                   const double* grow = g + (b * Cout + co) * Lo;
                                   const double* wrow = w + (ci * Cout + co) * k;
                                   for (int64_t li = 0; li < L; ++li) {
                                       int64_t base = li * stride - padding;
                                       double s = 0.0;
                                       for (int64_t kk = 0; kk < k; ++kk) {
                                           int64_t l = base + kk;
                                           if (l >= 0 && l < Lo) s += grow[l] * wrow[kk];
                                       }
                                       girow[li] += s;
                                   }
                               }
                           }
                   }
                   if (pw->requires_grad) {
                       ensure_grad(*pw);
                       double* gw = pw->grad.data();
                       const double* in = pi->value.data();
#pragma omp parallel for schedule(static) if (Cin > 1 && B * Cout * L * Cin * k > 16384)
                       for (int64_t ci = 0; ci < Cin; ++ci)
                           for (int64_t co = 0; co < Cout; ++co) {
                               double* gwrow = gw + (ci * Cout + co) * k;
                               for (int64_t b = 0; b < B; ++b) {
                                   const double* irow = in + (b * Cin + ci) * L;
                                   const double* grow = g + (b * Cout + co) * Lo;
                                   for (int64_t li = 0; li < L; ++li) {
                                       int64_t base = li * stride - padding;
                                       double iv = irow[li];
                                       for (int64_t kk = 0; kk < k; ++kk) {
                                           int64_t l = base + kk;
                                           if (l >= 0 && l < Lo) gwrow[kk] += iv * grow[l];
                                       }
                                   }
                               }
                           }
                   }
                   if (pb->requires_grad) {
                       ensure_grad(*pb);
                       for (int64_t co = 0; co < Cout; ++co) {
                           double s = 0.0;
                           for (int64_t b = 0; b < B; ++b) {
                               const double* grow = g + (b * Cout + co) * Lo;
                               for (int64_t l = 0; l < Lo; ++l) s += grow[l];
                           }
                           pb->grad[static_cast<size_t>(co)] += s;
                       }
                   }
               });
    }
    return Tensor(out);
}

Tensor maxpool1d(const Tensor& input, int64_t k, int64_t stride) {
    require_rank("maxpool1d", input, 3);
    if (k < 1 || stride < 1) throw std::invalid_argument("maxpool1d: k and stride must be >= 1");
    int64_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
    if (k > L)
        throw std::invalid_argument("maxpool1d: window " + std::to_string(k) +
                                    " exceeds length " + std::to_string(L));
    int64_t Lp = (L - k) / stride + 1;
    std::vector<double> v(static_cast<size_t>(B * C * Lp));
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(B * C * Lp));
    const double* in = input.data().data();
    for (int64_t r = 0; r < B * C; ++r) {
        const double* irow = in + r * L;
        for (int64_t lp = 0; lp < Lp; ++lp) {
            int64_t s = lp * stride;
            int64_t best = s;
            double bv = irow[s];
            for (int64_t kk = 1; kk < k; ++kk)
                if (irow[s + kk] > bv) {
                    bv = irow[s + kk];
                    best = s + kk;
                }
            v[static_cast<size_t>(r * Lp + lp)] = bv;
            (*argmax)[static_cast<size_t>(r * Lp + lp)] = best;
        }
    }
    auto out = new_node({B, C, Lp}, std::move(v));
    if (tracking({&input})) {
        Node* pi = input.node().get();
        attach(out, {&input}, [pi, argmax, B, C, L, Lp](Node& nd) {
            ensure_grad(*pi);
            for (int64_t r = 0; r < B * C; ++r)
                for (int64_t lp = 0; lp < Lp; ++lp)
                    pi->grad[static_cast<size_t>(r * L + (*argmax)[static_cast<size_t>(r * Lp + lp)])] +=
                        nd.grad[static_cast<size_t>(r * Lp + lp)];
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// nonlinearities / normalization
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& a) {
    std::vector<double> v(a.data());
    for (double& x : v)
        if (x < 0.0) x = 0.0;
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa](Node& n) {
            ensure_grad(*pa);
            for (size_t i = 0; i < n.grad.size(); ++i)
                if (pa->value[i] > 0.0) pa->grad[i] += n.grad[i];
        });
    }
    return Tensor(out);
}

Tensor softmax_lastdim(const Tensor& a) {
    int64_t L = a.shape().back();
    int64_t outer = a.numel() / L;
    std::vector<double> v(a.data().size());
    const auto& av = a.data();
    for (int64_t o = 0; o < outer; ++o) {
        const double* x = av.data() + o * L;
        double* y = v.data() + o * L;
        double mx = x[0];
        for (int64_t l = 1; l < L; ++l) mx = std::max(mx, x[l]);
        double s = 0.0;
        for (int64_t l = 0; l < L; ++l) {
            y[l] = std::exp(x[l] - mx);
            s += y[l];
        }
        for (int64_t l = 0; l < L; ++l) y[l] /= s;
    }
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa, outer, L](Node& n) {
            ensure_grad(*pa);
            for (int64_t o = 0; o < outer; ++o) {
                const double* y = n.value.data() + o * L;
                const double* g = n.grad.data() + o * L;
                double dot = 0.0;
                for (int64_t l = 0; l < L; ++l) dot += y[l] * g[l];
                double* gx = pa->grad.data() + o * L;
                for (int64_t l = 0; l < L; ++l) gx[l] += y[l] * (g[l] - dot);
            }
        });
    }
    return Tensor(out);
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
    require_rank("l2_normalize_rows", a, 2);
    int64_t B = a.dim(0), N = a.dim(1);
    std::vector<double> v(a.data().size());
    auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(B));
    const auto& av = a.data();
    for (int64_t b = 0; b < B; ++b) {
        double s = 0.0;
        for (int64_t i = 0; i < N; ++i) s += av[static_cast<size_t>(b * N + i)] * av[static_cast<size_t>(b * N + i)];
        double r = std::sqrt(s);
        if (r < eps)
            throw std::domain_error("l2_normalize_rows: zero-norm row " + std::to_string(b));
        (*norms)[static_cast<size_t>(b)] = r;
        for (int64_t i = 0; i < N; ++i) v[static_cast<size_t>(b * N + i)] = av[static_cast<size_t>(b * N + i)] / r;
    }
    auto out = new_node(a.shape(), std::move(v));
    if (tracking({&a})) {
        Node* pa = a.node().get();
        attach(out, {&a}, [pa, norms, B, N](Node& n) {
            ensure_grad(*pa);
            for (int64_t b = 0; b < B; ++b) {
                const double* y = n.value.data() + b * N;
                const double* g = n.grad.data() + b * N;
                double dot = 0.0;
                for (int64_t i = 0; i < N; ++i) dot += y[i] * g[i];
                double r = (*norms)[static_cast<size_t>(b)];
                double* gx = pa->grad.data() + b * N;
                for (int64_t i = 0; i < N; ++i) gx[i] += (g[i] - y[i] * dot) / r;
            }
        });
    }
    return Tensor(out);
}

namespace {

// Shared normalization backward: x-hat stored in `xhat`, reduction groups of
// size `gsize` indexed by `group_of(flat)`. Used by batchnorm/groupnorm/layernorm.
struct NormCtx {
    std::vector<double> xhat;
    std::vector<double> inv_std;  // per group
};

}  // namespace

Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   const std::vector<double>& mean, const std::vector<double>& var, double eps) {
    require_rank("batchnorm1d", x, 3);
    int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (gamma.numel() != C || beta.numel() != C ||
        static_cast<int64_t>(mean.size()) != C || static_cast<int64_t>(var.size()) != C)
        throw std::invalid_argument("batchnorm1d: parameter size mismatch for C=" +
                                    std::to_string(C));
    auto ctx = std::make_shared<NormCtx>();
    ctx->xhat.resize(x.data().size());
    ctx->inv_std.resize(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c)
        ctx->inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + eps);
    std::vector<double> v(x.data().size());
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            double is = ctx->inv_std[static_cast<size_t>(c)];
            double m = mean[static_cast<size_t>(c)];
            for (int64_t l = 0; l < L; ++l) {
                size_t i = static_cast<size_t>((b * C + c) * L + l);
                ctx->xhat[i] = (xv[i] - m) * is;
                v[i] = gv[static_cast<size_t>(c)] * ctx->xhat[i] + bv[static_cast<size_t>(c)];
            }
        }
    auto out = new_node(x.shape(), std::move(v));
    if (tracking({&x, &gamma, &beta})) {
        Node* px = x.node().get();
        Node* pg = gamma.node().get();
        Node* pb = beta.node().get();
        attach(out, {&x, &gamma, &beta}, [px, pg, pb, ctx, B, C, L](Node& n) {
            for (int64_t c = 0; c < C; ++c) {
                double is = ctx->inv_std[static_cast<size_t>(c)];
                double gval = pg->value[static_cast<size_t>(c)];
                double sg = 0.0, sgx = 0.0;
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t l = 0; l < L; ++l) {
                        size_t i = static_cast<size_t>((b * C + c) * L + l);
                        sg += n.grad[i];
                        sgx += n.grad[i] * ctx->xhat[i];
                    }
                if (pg->requires_grad) {
                    ensure_grad(*pg);
                    pg->grad[static_cast<size_t>(c)] += sgx;
                }
                if (pb->requires_grad) {
                    ensure_grad(*pb);
                    pb->grad[static_cast<size_t>(c)] += sg;
                }
                if (px->requires_grad) {
                    ensure_grad(*px);
                    // fixed statistics: d(xhat)/dx is just inv_std
                    for (int64_t b = 0; b < B; ++b)
                        for (int64_t l = 0; l < L; ++l) {
                            size_t i = static_cast<size_t>((b * C + c) * L + l);
                            px->grad[i] += n.grad[i] * gval * is;
                        }
                }
            }
        });
    }
    return Tensor(out);
}

Tensor batchnorm1d_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         std::vector<double>* batch_mean_out, std::vector<double>* batch_var_out,
                         double eps) {
    require_rank("batchnorm1d_train", x, 3);
    int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (gamma.numel() != C || beta.numel() != C)
        throw std::invalid_argument("batchnorm1d_train: parameter size mismatch for C=" +
                                    std::to_string(C));
    int64_t N = B * L;
    std::vector<double> mean(static_cast<size_t>(C), 0.0), var(static_cast<size_t>(C), 0.0);
    const auto& xv = x.data();
    for (int64_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t l = 0; l < L; ++l) s += xv[static_cast<size_t>((b * C + c) * L + l)];
        mean[static_cast<size_t>(c)] = s / static_cast<double>(N);
        double sv = 0.0;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t l = 0; l < L; ++l) {
                double d = xv[static_cast<size_t>((b * C + c) * L + l)] - mean[static_cast<size_t>(c)];
                sv += d * d;
            }
        var[static_cast<size_t>(c)] = sv / static_cast<double>(N);
    }
    if (batch_mean_out) *batch_mean_out = mean;
    if (batch_var_out) *batch_var_out = var;

    auto ctx = std::make_shared<NormCtx>();
    ctx->xhat.resize(xv.size());
    ctx->inv_std.resize(static_cast<size_t>(C));
    std::vector<double> v(xv.size());
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (int64_t c = 0; c < C; ++c) {
        double is = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + eps);
        ctx->inv_std[static_cast<size_t>(c)] = is;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t l = 0; l < L; ++l) {
                size_t i = static_cast<size_t>((b * C + c) * L + l);
                ctx->xhat[i] = (xv[i] - mean[static_cast<size_t>(c)]) * is;
                v[i] = gv[static_cast<size_t>(c)] * ctx->xhat[i] + bv[static_cast<size_t>(c)];
            }
    }
    auto out = new_node(x.shape(), std::move(v));
    if (tracking({&x, &gamma, &beta})) {
        Node* px = x.node().get();
        Node* pg = gamma.node().get();
        Node* pb = beta.node().get();
        attach(out, {&x, &gamma, &beta}, [px, pg, pb, ctx, B, C, L, N](Node& n) {
            for (int64_t c = 0; c < C; ++c) {
                double is = ctx->inv_std[static_cast<size_t>(c)];
                double gval = pg->value[static_cast<size_t>(c)];
                double sg = 0.0, sgx = 0.0;
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t l = 0; l < L; ++l) {
                        size_t i = static_cast<size_t>((b * C + c) * L + l);
                        sg += n.grad[i];
                        sgx += n.grad[i] * ctx->xhat[i];
                    }
                if (pg->requires_grad) {
                    ensure_grad(*pg);
                    pg->grad[static_cast<size_t>(c)] += sgx;
                }
                if (pb->requires_grad) {
                    ensure_grad(*pb);
                    pb->grad[static_cast<size_t>(c)] += sg;
                }
                if (px->requires_grad) {
                    ensure_grad(*px);
                    double inv_n = 1.0 / static_cast<double>(N);
                    for (int64_t b = 0; b < B; ++b)
                        for (int64_t l = 0; l < L; ++l) {
                            size_t i = static_cast<size_t>((b * C + c) * L + l);
                            px->grad[i] += gval * is *
                                           (n.grad[i] - inv_n * sg - ctx->xhat[i] * inv_n * sgx);
                        }
                }
            }
        });
    }
    return Tensor(out);
}

Tensor groupnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int64_t groups,
                 double eps) {
    require_rank("groupnorm", x, 3);
    int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (groups < 1 || C % groups != 0)
        throw std::invalid_argument("groupnorm: C=" + std::to_string(C) +
                                    " not divisible by groups=" + std::to_string(groups));
    if (gamma.numel() != C || beta.numel() != C)
        throw std::invalid_argument("groupnorm: parameter size mismatch for C=" +
                                    std::to_string(C));
    int64_t Cg = C / groups;
    int64_t N = Cg * L;
    auto ctx = std::make_shared<NormCtx>();
    ctx->xhat.resize(x.data().size());
    ctx->inv_std.resize(static_cast<size_t>(B * groups));
    std::vector<double> v(x.data().size());
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t g = 0; g < groups; ++g) {
            double s = 0.0;
            for (int64_t cc = 0; cc < Cg; ++cc)
                for (int64_t l = 0; l < L; ++l)
                    s += xv[static_cast<size_t>((b * C + g * Cg + cc) * L + l)];
            double m = s / static_cast<double>(N);
            double sv = 0.0;
            for (int64_t cc = 0; cc < Cg; ++cc)
                for (int64_t l = 0; l < L; ++l) {
                    double d = xv[static_cast<size_t>((b * C + g * Cg + cc) * L + l)] - m;
                    sv += d * d;
                }
            double is = 1.0 / std::sqrt(sv / static_cast<double>(N) + eps);
            ctx->inv_std[static_cast<size_t>(b * groups + g)] = is;
            for (int64_t cc = 0; cc < Cg; ++cc) {
                int64_t c = g * Cg + cc;
                for (int64_t l = 0; l < L; ++l) {
                    size_t i = static_cast<size_t>((b * C + c) * L + l);
                    ctx->xhat[i] = (xv[i] - m) * is;
                    v[i] = gv[static_cast<size_t>(c)] * ctx->xhat[i] + bv[static_cast<size_t>(c)];
                }
            }
        }
    auto out = new_node(x.shape(), std::move(v));
    if (tracking({&x, &gamma, &beta})) {
        Node* px = x.node().get();
        Node* pg = gamma.node().get();
        Node* pb = beta.node().get();
        attach(out, {&x, &gamma, &beta}, [px, pg, pb, ctx, B, C, L, groups, Cg, N](Node& n) {
            if (pg->requires_grad) ensure_grad(*pg);
            if (pb->requires_grad) ensure_grad(*pb);
            if (px->requires_grad) ensure_grad(*px);
            for (int64_t b = 0; b < B; ++b)
                for (int64_t g = 0; g < groups; ++g) {
                    double is = ctx->inv_std[static_cast<size_t>(b * groups + g)];
                    double sgg = 0.0, sgx = 0.0;  // sums of gamma*grad and gamma*grad*xhat
                    for (int64_t cc = 0; cc < Cg; ++cc) {
                        int64_t c = g * Cg + cc;
                        double gval = pg->value[static_cast<size_t>(c)];
                        for (int64_t l = 0; l < L; ++l) {
                            size_t i = static_cast<size_t>((b * C + c) * L + l);
                            sgg += gval * n.grad[i];
                            sgx += gval * n.grad[i] * ctx->xhat[i];
                        }
                    }
                    double inv_n = 1.0 / static_cast<double>(N);
                    for (int64_t cc = 0; cc < Cg; ++cc) {
                        int64_t c = g * Cg + cc;
                        double gval = pg->value[static_cast<size_t>(c)];
                        for (int64_t l = 0; l < L; ++l) {
                            size_t i = static_cast<size_t>((b * C + c) * L + l);
                            if (pg->requires_grad)
                                pg->grad[static_cast<size_t>(c)] += n.grad[i] * ctx->xhat[i];
                            if (pb->requires_grad) pb->grad[static_cast<size_t>(c)] += n.grad[i];
                            if (px->requires_grad)
                                px->grad[i] += is * (gval * n.grad[i] - inv_n * sgg -
                                                     ctx->xhat[i] * inv_n * sgx);
                        }
                    }
                }
        });
    }
    return Tensor(out);
}

Tensor layernorm_lastdim(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    int64_t N = x.shape().back();
    int64_t outer = x.numel() / N;
    if (gamma.numel() != N || beta.numel() != N)
        throw std::invalid_argument("layernorm_lastdim: parameter size mismatch for N=" +
                                    std::to_string(N));
    auto ctx = std::make_shared<NormCtx>();
    ctx->xhat.resize(x.data().size());
    ctx->inv_std.resize(static_cast<size_t>(outer));
    std::vector<double> v(x.data().size());
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (int64_t o = 0; o < outer; ++o) {
        const double* xr = xv.data() + o * N;
        double m = 0.0;
        for (int64_t i = 0; i < N; ++i) m += xr[i];
        m /= static_cast<double>(N);
        double sv = 0.0;
        for (int64_t i = 0; i < N; ++i) sv += (xr[i] - m) * (xr[i] - m);
        double is = 1.0 / std::sqrt(sv / static_cast<double>(N) + eps);
        ctx->inv_std[static_cast<size_t>(o)] = is;
        for (int64_t i = 0; i < N; ++i) {
            size_t idx = static_cast<size_t>(o * N + i);
            ctx->xhat[idx] = (xr[i] - m) * is;
            v[idx] = gv[static_cast<size_t>(i)] * ctx->xhat[idx] + bv[static_cast<size_t>(i)];
        }
    }
    auto out = new_node(x.shape(), std::move(v));
    if (tracking({&x, &gamma, &beta})) {
        Node* px = x.node().get();
        Node* pg = gamma.node().get();
        Node* pb = beta.node().get();
        attach(out, {&x, &gamma, &beta}, [px, pg, pb, ctx, outer, N](Node& n) {
            if (pg->requires_grad) ensure_grad(*pg);
            if (pb->requires_grad) ensure_grad(*pb);
            if (px->requires_grad) ensure_grad(*px);
            for (int64_t o = 0; o < outer; ++o) {
                double is = ctx->inv_std[static_cast<size_t>(o)];
                double sgg = 0.0, sgx = 0.0;
                for (int64_t i = 0; i < N; ++i) {
                    size_t idx = static_cast<size_t>(o * N + i);
                    double gg = pg->value[static_cast<size_t>(i)] * n.grad[idx];
                    sgg += gg;
                    sgx += gg * ctx->xhat[idx];
                }
                double inv_n = 1.0 / static_cast<double>(N);
                for (int64_t i = 0; i < N; ++i) {
                    size_t idx = static_cast<size_t>(o * N + i);
                    if (pg->requires_grad)
                        pg->grad[static_cast<size_t>(i)] += n.grad[idx] * ctx->xhat[idx];
                    if (pb->requires_grad) pb->grad[static_cast<size_t>(i)] += n.grad[idx];
                    if (px->requires_grad)
                        px->grad[idx] += is * (pg->value[static_cast<size_t>(i)] * n.grad[idx] -
                                               inv_n * sgg - ctx->xhat[idx] * inv_n * sgx);
                }
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels) {
    require_rank("softmax_cross_entropy", logits, 2);
    int64_t B = logits.dim(0), M = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != B)
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for batch " + std::to_string(B));
    for (int64_t b = 0; b < B; ++b)
        if (labels[static_cast<size_t>(b)] < 0 || labels[static_cast<size_t>(b)] >= M)
            throw std::out_of_range("softmax_cross_entropy: label " +
                                    std::to_string(labels[static_cast<size_t>(b)]) + " at index " +
                                    std::to_string(b) + " outside [0," + std::to_string(M) + ")");
    auto probs = std::make_shared<std::vector<double>>(logits.data().size());
    const auto& xv = logits.data();
    double loss = 0.0;
    for (int64_t b = 0; b < B; ++b) {
        const double* x = xv.data() + b * M;
        double* p = probs->data() + b * M;
        double mx = x[0];
        for (int64_t m = 1; m < M; ++m) mx = std::max(mx, x[m]);
        double s = 0.0;
        for (int64_t m = 0; m < M; ++m) {
            p[m] = std::exp(x[m] - mx);
            s += p[m];
        }
        for (int64_t m = 0; m < M; ++m) p[m] /= s;
        loss -= std::log(p[labels[static_cast<size_t>(b)]]);
    }
    loss /= static_cast<double>(B);
    auto out = new_node({1}, {loss});
    if (tracking({&logits})) {
        Node* px = logits.node().get();
        auto lab = std::make_shared<std::vector<int64_t>>(labels);
        attach(out, {&logits}, [px, probs, lab, B, M](Node& n) {
            ensure_grad(*px);
            double g = n.grad[0] / static_cast<double>(B);
            for (int64_t b = 0; b < B; ++b)
                for (int64_t m = 0; m < M; ++m) {
                    double d = (*probs)[static_cast<size_t>(b * M + m)] -
                               (m == (*lab)[static_cast<size_t>(b)] ? 1.0 : 0.0);
                    px->grad[static_cast<size_t>(b * M + m)] += g * d;
                }
        });
    }
    return Tensor(out);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) shape_error("mse_loss", pred, target);
    const auto& pv = pred.data();
    const auto& tv = target.data();
    double s = 0.0;
    for (size_t i = 0; i < pv.size(); ++i) {
        double d = pv[i] - tv[i];
        s += d * d;
    }
    double inv = 1.0 / static_cast<double>(pred.numel());
    auto out = new_node({1}, {s * inv});
    if (tracking({&pred, &target})) {
        Node* pp = pred.node().get();
        Node* pt = target.node().get();
        attach(out, {&pred, &target}, [pp, pt, inv](Node& n) {
            double g = 2.0 * inv * n.grad[0];
            if (pp->requires_grad) {
                ensure_grad(*pp);
                for (size_t i = 0; i < pp->value.size(); ++i)
                    pp->grad[i] += g * (pp->value[i] - pt->value[i]);
            }
            if (pt->requires_grad) {
                ensure_grad(*pt);
                for (size_t i = 0; i < pt->value.size(); ++i)
                    pt->grad[i] -= g * (pp->value[i] - pt->value[i]);
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// fixed embeddings
// ---------------------------------------------------------------------------

std::vector<double> sinusoidal_timestep_embedding(int64_t t, int64_t dim) {
    if (dim % 2 != 0)
        throw std::invalid_argument("sinusoidal_timestep_embedding: dim must be even, got " +
                                    std::to_string(dim));
    if (t < 0)
        throw std::invalid_argument("sinusoidal_timestep_embedding: t must be >= 0");
    std::vector<double> emb(static_cast<size_t>(dim));
    for (int64_t i = 0; i < dim / 2; ++i) {
        double w = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
        emb[static_cast<size_t>(2 * i)] = std::sin(static_cast<double>(t) * w);
        emb[static_cast<size_t>(2 * i + 1)] = std::cos(static_cast<double>(t) * w);
    }
    return emb;
}

}  // namespace stylepad
