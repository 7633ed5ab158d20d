#include <cmath>
#include <vector>

#include "doctest.h"
#include "stylepad/optim.hpp"
#include "stylepad/rng.hpp"
#include "stylepad/tensor.hpp"
#include "test_util.hpp"

using namespace stylepad;
using testutil::finite_diff_check;
using testutil::random_tensor;

TEST_CASE("conv1d: zero input gives constant bias rows") {
    RngStream rng("conv-zero", 1);
    Tensor x = Tensor::zeros({2, 3, 8});
    Tensor w = random_tensor({4, 3, 3}, rng, false);
    Tensor b = Tensor::from_data({4}, {0.5, -1.0, 2.0, 0.0});
    Tensor y = conv1d(x, w, b, 1, 1);
    CHECK(y.shape() == Shape{2, 4, 8});
    for (int64_t bi = 0; bi < 2; ++bi)
        for (int64_t c = 0; c < 4; ++c)
            for (int64_t l = 0; l < 8; ++l)
                CHECK(y.data()[static_cast<size_t>((bi * 4 + c) * 8 + l)] ==
                      doctest::Approx(b.data()[static_cast<size_t>(c)]));
}

TEST_CASE("conv1d: k=1 identity mixing reproduces the input") {
    RngStream rng("conv-id", 2);
    Tensor x = random_tensor({2, 3, 10}, rng, false);
    std::vector<double> wv(9, 0.0);
    wv[0 * 3 + 0] = 1.0;
    wv[1 * 3 + 1] = 1.0;
    wv[2 * 3 + 2] = 1.0;
    Tensor w = Tensor::from_data({3, 3, 1}, std::move(wv));
    Tensor b = Tensor::zeros({3});
    Tensor y = conv1d(x, w, b, 1, 0);
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < y.data().size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("conv1d: output length formula over a small grid") {
    for (int64_t L = 1; L <= 12; ++L)
        for (int64_t k = 1; k <= 5; ++k)
            for (int64_t stride = 1; stride <= 3; ++stride)
                for (int64_t pad = 0; pad <= 2; ++pad) {
                    if (k > L + 2 * pad) continue;
                    Tensor x = Tensor::zeros({1, 1, L});
                    Tensor w = Tensor::full({1, 1, k}, 0.3);
                    Tensor b = Tensor::zeros({1});
                    Tensor y = conv1d(x, w, b, stride, pad);
                    int64_t expect = (L + 2 * pad - k) / stride + 1;
                    CHECK(y.dim(2) == expect);
                }
}

TEST_CASE("conv1d: shape errors name the offending axes") {
    Tensor x = Tensor::zeros({1, 3, 8});
    Tensor w = Tensor::zeros({4, 2, 3});
    Tensor b = Tensor::zeros({4});
    CHECK_THROWS_WITH_AS(conv1d(x, w, b, 1, 0), doctest::Contains("Cin"),
                         std::invalid_argument);
    Tensor w2 = Tensor::zeros({4, 3, 11});
    CHECK_THROWS_AS(conv1d(x, w2, b, 1, 0), std::invalid_argument);
}

TEST_CASE("conv1d: gradients match finite differences on random 2x3x8 input") {
    RngStream rng("conv-grad", 3);
    Tensor x = random_tensor({2, 3, 8}, rng);
    Tensor w = random_tensor({4, 3, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    auto loss = [&] { return sum_all(conv1d(x, w, b, 1, 1)); };
    auto res = finite_diff_check(loss, {x, w, b});
    CHECK(res.max_rel_err < 1e-4);

    // stride 2, no padding
    auto loss2 = [&] { return mean_all(mul(conv1d(x, w, b, 2, 0), conv1d(x, w, b, 2, 0))); };
    auto res2 = finite_diff_check(loss2, {x, w, b});
    CHECK(res2.max_rel_err < 1e-4);
}

TEST_CASE("conv_transpose1d: gradients and output length") {
    RngStream rng("convt-grad", 4);
    Tensor x = random_tensor({2, 3, 6}, rng);
    Tensor w = random_tensor({3, 2, 3}, rng);
    Tensor b = random_tensor({2}, rng);
    Tensor y = conv_transpose1d(x, w, b, 2, 1, 1);
    CHECK(y.dim(2) == (6 - 1) * 2 - 2 + 3 + 1);  // 12
    auto loss = [&] {
        Tensor out = conv_transpose1d(x, w, b, 2, 1, 1);
        return mean_all(mul(out, out));
    };
    auto res = finite_diff_check(loss, {x, w, b});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("maxpool1d: forward values and gradient routing") {
    Tensor x = Tensor::from_data({1, 1, 6}, {1.0, 3.0, 2.0, 5.0, 4.0, 0.0}, true);
    Tensor y = maxpool1d(x, 2, 2);
    CHECK(y.data() == std::vector<double>{3.0, 5.0, 4.0});
    RngStream rng("pool-grad", 5);
    Tensor z = random_tensor({2, 3, 9}, rng);
    auto loss = [&] {
        Tensor p = maxpool1d(z, 3, 2);
        return mean_all(mul(p, p));
    };
    auto res = finite_diff_check(loss, {z});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("linear algebra ops: gradients match finite differences") {
    RngStream rng("la-grad", 6);
    Tensor a = random_tensor({4, 5}, rng);
    Tensor b = random_tensor({5, 3}, rng);
    auto l1 = [&] { return mean_all(mul(matmul(a, b), matmul(a, b))); };
    CHECK(finite_diff_check(l1, {a, b}).max_rel_err < 1e-4);

    Tensor c = random_tensor({6, 5}, rng);
    auto l2 = [&] { return mean_all(mul(matmul_nt(a, c), matmul_nt(a, c))); };
    CHECK(finite_diff_check(l2, {a, c}).max_rel_err < 1e-4);

    Tensor p = random_tensor({2, 3, 4}, rng);
    Tensor q = random_tensor({2, 4, 5}, rng);
    auto l3 = [&] { return mean_all(mul(bmm(p, q), bmm(p, q))); };
    CHECK(finite_diff_check(l3, {p, q}).max_rel_err < 1e-4);

    Tensor r = random_tensor({2, 6, 4}, rng);
    auto l4 = [&] { return mean_all(mul(bmm_nt(p, r), bmm_nt(p, r))); };
    CHECK(finite_diff_check(l4, {p, r}).max_rel_err < 1e-4);
}

TEST_CASE("elementwise and shape ops: gradients match finite differences") {
    RngStream rng("ew-grad", 7);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    auto l1 = [&] { return mean_all(mul(add(a, b), sub(a, scale(b, 0.5)))); };
    CHECK(finite_diff_check(l1, {a, b}).max_rel_err < 1e-4);

    Tensor x = random_tensor({2, 3, 5}, rng);
    Tensor w = random_tensor({2, 1, 5}, rng);
    auto l2 = [&] { return mean_all(mul(x, w)); };
    CHECK(finite_diff_check(l2, {x, w}).max_rel_err < 1e-4);

    auto l3 = [&] {
        Tensor t = transpose_12(x);
        Tensor s = slice_lastdim(t, 1, 2);
        return mean_all(mul(s, s));
    };
    CHECK(finite_diff_check(l3, {x}).max_rel_err < 1e-4);

    Tensor y = random_tensor({2, 2, 5}, rng);
    auto l4 = [&] {
        Tensor cc = concat_channels(x, y);
        return mean_all(mul(cc, cc));
    };
    CHECK(finite_diff_check(l4, {x, y}).max_rel_err < 1e-4);

    Tensor v = random_tensor({4}, rng);
    auto l5 = [&] {
        Tensor z = add_rowvec(a, v);
        return mean_all(mul(z, z));
    };
    CHECK(finite_diff_check(l5, {a, v}).max_rel_err < 1e-4);

    Tensor e = random_tensor({2, 3}, rng);
    auto l6 = [&] {
        Tensor z = add_cond_bias(x, e);
        return mean_all(mul(z, z));
    };
    CHECK(finite_diff_check(l6, {x, e}).max_rel_err < 1e-4);

    auto l7 = [&] {
        Tensor z = sum_lastdim(x);
        return mean_all(mul(z, z));
    };
    CHECK(finite_diff_check(l7, {x}).max_rel_err < 1e-4);

    Tensor rows_a = random_tensor({2, 4}, rng);
    Tensor rows_b = random_tensor({3, 4}, rng);
    auto l8 = [&] {
        Tensor z = concat_rows(rows_a, rows_b);
        return mean_all(mul(z, z));
    };
    CHECK(finite_diff_check(l8, {rows_a, rows_b}).max_rel_err < 1e-4);
}

TEST_CASE("nonlinearities and normalizations: gradients match finite differences") {
    RngStream rng("nl-grad", 8);
    Tensor x = random_tensor({3, 4, 6}, rng);
    auto l1 = [&] { return mean_all(mul(relu(x), relu(x))); };
    CHECK(finite_diff_check(l1, {x}).max_rel_err < 1e-4);

    Tensor gamma = random_tensor({4}, rng);
    Tensor beta = random_tensor({4}, rng);
    auto l2 = [&] {
        Tensor y = batchnorm1d_train(x, gamma, beta, nullptr, nullptr, 1e-5);
        return mean_all(mul(y, y));
    };
    CHECK(finite_diff_check(l2, {x, gamma, beta}).max_rel_err < 1e-4);

    std::vector<double> m = {0.1, -0.2, 0.3, 0.0}, v = {1.1, 0.9, 1.3, 0.7};
    auto l3 = [&] {
        Tensor y = batchnorm1d(x, gamma, beta, m, v, 1e-5);
        return mean_all(mul(y, y));
    };
    CHECK(finite_diff_check(l3, {x, gamma, beta}).max_rel_err < 1e-4);

    auto l4 = [&] {
        Tensor y = groupnorm(x, gamma, beta, 2, 1e-5);
        return mean_all(mul(y, y));
    };
    CHECK(finite_diff_check(l4, {x, gamma, beta}).max_rel_err < 1e-4);

    Tensor g6 = random_tensor({6}, rng);
    Tensor b6 = random_tensor({6}, rng);
    auto l5 = [&] {
        Tensor y = layernorm_lastdim(x, g6, b6, 1e-5);
        return mean_all(mul(y, y));
    };
    CHECK(finite_diff_check(l5, {x, g6, b6}).max_rel_err < 1e-4);

    Tensor sm = random_tensor({4, 7}, rng);
    auto l6 = [&] {
        Tensor y = softmax_lastdim(sm);
        return mean_all(mul(y, y));
    };
    CHECK(finite_diff_check(l6, {sm}).max_rel_err < 1e-4);

    Tensor nr = random_tensor({3, 5}, rng);
    Tensor nw = random_tensor({3, 5}, rng, false);
    auto l7 = [&] { return mean_all(mul(l2_normalize_rows(nr), nw)); };
    CHECK(finite_diff_check(l7, {nr}).max_rel_err < 1e-4);
}

TEST_CASE("softmax_cross_entropy: uniform logits give ln M") {
    Tensor logits = Tensor::full({3, 5}, 0.7);
    Tensor loss = softmax_cross_entropy(logits, {0, 2, 4});
    CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy: saturated correct logit drives loss to zero") {
    Tensor logits = Tensor::from_data({1, 3}, {0.0, 0.0, 60.0});
    CHECK(softmax_cross_entropy(logits, {2}).item() < 1e-12);
}

TEST_CASE("softmax_cross_entropy: direct evaluation fixture") {
    Tensor logits = Tensor::from_data({1, 3}, {1.0, 2.0, 3.0});
    CHECK(softmax_cross_entropy(logits, {2}).item() == doctest::Approx(0.40760596).epsilon(1e-7));
}

TEST_CASE("softmax_cross_entropy: invariant to constant logit shifts") {
    RngStream rng("ce-shift", 9);
    Tensor logits = random_tensor({4, 6}, rng, false);
    std::vector<int64_t> labels = {1, 0, 5, 3};
    double base = softmax_cross_entropy(logits, labels).item();
    Tensor shifted = add_scalar(logits, 123.456);
    CHECK(std::abs(softmax_cross_entropy(shifted, labels).item() - base) < 1e-12);
}

TEST_CASE("softmax_cross_entropy: label out of range reports the index") {
    Tensor logits = Tensor::zeros({2, 3});
    CHECK_THROWS_WITH_AS(softmax_cross_entropy(logits, {0, 3}), doctest::Contains("index 1"),
                         std::out_of_range);
}

TEST_CASE("softmax_cross_entropy and mse: gradients match finite differences") {
    RngStream rng("loss-grad", 10);
    Tensor logits = random_tensor({5, 4}, rng);
    std::vector<int64_t> labels = {0, 3, 1, 2, 2};
    auto l1 = [&] { return softmax_cross_entropy(logits, labels); };
    CHECK(finite_diff_check(l1, {logits}).max_rel_err < 1e-4);

    Tensor p = random_tensor({3, 4}, rng);
    Tensor t = random_tensor({3, 4}, rng);
    auto l2 = [&] { return mse_loss(p, t); };
    CHECK(finite_diff_check(l2, {p, t}).max_rel_err < 1e-4);
}

TEST_CASE("sinusoidal embedding: t=0 alternates 0,1") {
    auto emb = sinusoidal_timestep_embedding(0, 8);
    for (size_t i = 0; i < emb.size(); i += 2) {
        CHECK(emb[i] == doctest::Approx(0.0));
        CHECK(emb[i + 1] == doctest::Approx(1.0));
    }
}

TEST_CASE("sinusoidal embedding: all entries within [-1,1]") {
    for (int64_t t : {1, 17, 50, 100}) {
        auto emb = sinusoidal_timestep_embedding(t, 32);
        for (double v : emb) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("sinusoidal embedding: t=5 dim=4 matches the direct formula") {
    auto emb = sinusoidal_timestep_embedding(5, 4);
    double w1 = std::pow(10000.0, -0.5);
    CHECK(emb[0] == doctest::Approx(std::sin(5.0)).epsilon(1e-12));
    CHECK(emb[1] == doctest::Approx(std::cos(5.0)).epsilon(1e-12));
    CHECK(emb[2] == doctest::Approx(std::sin(5.0 * w1)).epsilon(1e-12));
    CHECK(emb[3] == doctest::Approx(std::cos(5.0 * w1)).epsilon(1e-12));
    CHECK_THROWS_AS(sinusoidal_timestep_embedding(5, 3), std::invalid_argument);
}

TEST_CASE("reverse_gradient: loss = sum(p) gives ones") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true));
    Tensor loss = sum_all(p);
    reverse_gradient(loss, ps);
    for (double g : p.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("reverse_gradient: loss = sum(p*p) gives 2p") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({4}, {1.0, -2.0, 0.5, 3.0}, true));
    reverse_gradient(sum_all(mul(p, p)), ps);
    for (size_t i = 0; i < 4; ++i)
        CHECK(p.grad()[i] == doctest::Approx(2.0 * p.data()[i]).epsilon(1e-12));
}

TEST_CASE("reverse_gradient: accumulates across calls, zero_grads resets") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({2}, {1.0, 2.0}, true));
    reverse_gradient(sum_all(p), ps);
    reverse_gradient(sum_all(p), ps);
    CHECK(p.grad()[0] == doctest::Approx(2.0));
    zero_grads(ps);
    CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("reverse_gradient: disconnected parameter gets zero grad, not an error") {
    ParameterSet ps;
    Tensor p = ps.create("used", Tensor::from_data({2}, {1.0, 2.0}, true));
    Tensor q = ps.create("unused", Tensor::from_data({2}, {3.0, 4.0}, true));
    reverse_gradient(sum_all(p), ps);
    CHECK(q.grad()[0] == 0.0);
    CHECK(q.grad()[1] == 0.0);
}

TEST_CASE("reverse_gradient: non-scalar loss is rejected") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({2}, {1.0, 2.0}, true));
    CHECK_THROWS_AS(reverse_gradient(add(p, p), ps), std::invalid_argument);
}

TEST_CASE("two-layer network gradients match finite differences") {
    RngStream rng("net-grad", 11);
    Tensor x = random_tensor({4, 6}, rng, false);
    Tensor w1 = random_tensor({6, 8}, rng, true, 0.5);
    Tensor b1 = random_tensor({8}, rng, true, 0.1);
    Tensor w2 = random_tensor({8, 3}, rng, true, 0.5);
    Tensor b2 = random_tensor({3}, rng, true, 0.1);
    std::vector<int64_t> labels = {0, 1, 2, 1};
    auto loss = [&] {
        Tensor h = relu(add_rowvec(matmul(x, w1), b1));
        Tensor logits = add_rowvec(matmul(h, w2), b2);
        return softmax_cross_entropy(logits, labels);
    };
    auto res = finite_diff_check(loss, {w1, b1, w2, b2});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("no-grad mode records no graph") {
    Tensor p = Tensor::from_data({2}, {1.0, 2.0}, true);
    NoGradGuard ng;
    Tensor y = mul(p, p);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}

TEST_CASE("check_finite flags NaN") {
    Tensor p = Tensor::from_data({2}, {1.0, 2.0});
    CHECK_NOTHROW(p.check_finite("p"));
    p.data()[1] = std::nan("");
    CHECK_THROWS_AS(p.check_finite("p"), std::domain_error);
}
