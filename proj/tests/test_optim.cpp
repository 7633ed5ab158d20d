#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "stylepad/checkpoint.hpp"
#include "stylepad/nn.hpp"
#include "stylepad/optim.hpp"
#include "stylepad/rng.hpp"
#include "test_util.hpp"

using namespace stylepad;

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({3}, {1.0, -2.0, 0.5}, true));
    p.grad();  // zeros
    AdamState st = make_adam(0.1);
    adam_step(ps, st);
    CHECK(p.data() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam: hand-computed first step on a scalar") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({1}, {0.0}, true));
    p.grad()[0] = 1.0;
    AdamState st = make_adam(0.1, 0.9, 0.999, 1e-8);
    adam_step(ps, st);
    // m-hat = v-hat = 1 after bias correction, so the update is -lr / (1 + eps).
    CHECK(p.data()[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(st.t_opt == 1);
}

TEST_CASE("adam: identical params with identical grads move identically") {
    ParameterSet ps;
    Tensor a = ps.create("a", Tensor::from_data({2}, {0.3, -0.7}, true));
    Tensor b = ps.create("b", Tensor::from_data({2}, {0.3, -0.7}, true));
    AdamState st = make_adam(0.01);
    for (int step = 0; step < 5; ++step) {
        a.grad()[0] = 0.2;
        a.grad()[1] = -0.1;
        b.grad()[0] = 0.2;
        b.grad()[1] = -0.1;
        adam_step(ps, st);
        zero_grads(ps);
    }
    CHECK(a.data() == b.data());
}

TEST_CASE("adam: missing gradient is an error naming the parameter") {
    ParameterSet ps;
    ps.create("weights.w", Tensor::from_data({1}, {0.0}, true));
    AdamState st = make_adam(0.1);
    CHECK_THROWS_WITH_AS(adam_step(ps, st), doctest::Contains("weights.w"), std::runtime_error);
}

TEST_CASE("adam: grads are untouched by the step") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({1}, {0.0}, true));
    p.grad()[0] = 2.5;
    AdamState st = make_adam(0.1);
    adam_step(ps, st);
    CHECK(p.grad()[0] == 2.5);
}

TEST_CASE("adam drives a quadratic toward its minimum") {
    ParameterSet ps;
    Tensor p = ps.create("p", Tensor::from_data({2}, {3.0, -4.0}, true));
    AdamState st = make_adam(0.05);
    for (int i = 0; i < 400; ++i) {
        zero_grads(ps);
        reverse_gradient(sum_all(mul(p, p)), ps);
        adam_step(ps, st);
    }
    CHECK(std::abs(p.data()[0]) < 1e-2);
    CHECK(std::abs(p.data()[1]) < 1e-2);
}

TEST_CASE("checkpoint: round-trips a parameter set byte-exactly") {
    RngStream rng("ckpt", 21);
    ParameterSet ps;
    Linear lin(ps, "enc.fc", 5, 3, rng);
    Conv1d conv(ps, "enc.conv", 2, 4, 3, 1, 1, rng);
    auto tmp = std::filesystem::temp_directory_path() / "stylepad_ckpt_test.bin";
    save_checkpoint(tmp.string(), ps);

    RngStream rng2("other", 99);
    ParameterSet ps2;
    Linear lin2(ps2, "enc.fc", 5, 3, rng2);
    Conv1d conv2(ps2, "enc.conv", 2, 4, 3, 1, 1, rng2);
    load_checkpoint(tmp.string(), ps2);
    for (size_t i = 0; i < ps.items().size(); ++i)
        CHECK(ps.items()[i].second.data() == ps2.items()[i].second.data());
    std::filesystem::remove(tmp);
}

TEST_CASE("checkpoint: rejects bad magic and shape mismatches") {
    auto tmp = std::filesystem::temp_directory_path() / "stylepad_ckpt_bad.bin";
    {
        std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
        std::fputs("NOPE", f);
        std::fclose(f);
    }
    ParameterSet ps;
    ps.create("p", Tensor::zeros({2}, true));
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.string(), ps), doctest::Contains("magic"),
                         std::runtime_error);
    std::filesystem::remove(tmp);

    auto tmp2 = std::filesystem::temp_directory_path() / "stylepad_ckpt_shape.bin";
    save_checkpoint(tmp2.string(), ps);
    ParameterSet ps3;
    ps3.create("p", Tensor::zeros({3}, true));
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp2.string(), ps3), doctest::Contains("shape"),
                         std::runtime_error);
    std::filesystem::remove(tmp2);
}

TEST_CASE("layers: forward shapes and gradcheck through a composite block") {
    RngStream rng("layers", 31);
    ParameterSet ps, buf;
    Conv1d c1(ps, "c1", 3, 6, 3, 1, 1, rng);
    BatchNorm1d bn(ps, buf, "bn", 6);
    GroupNorm gn(ps, "gn", 6);
    Linear fc(ps, "fc", 6, 4, rng);

    Tensor x = testutil::random_tensor({2, 3, 8}, rng, false);
    auto loss = [&] {
        Tensor h = relu(bn.forward(c1.forward(x), true));
        h = gn.forward(h);
        Tensor pooled = sum_lastdim(h);      // [2, 6]
        Tensor logits = fc.forward(pooled);  // [2, 4]
        return softmax_cross_entropy(logits, {1, 3});
    };
    std::vector<Tensor> leaves;
    for (auto& [name, t] : ps.items()) leaves.push_back(t);
    auto res = testutil::finite_diff_check(loss, leaves);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("attention pool and transformer layer: shapes and gradients") {
    RngStream rng("attn", 41);
    ParameterSet ps;
    TransformerLayer tl(ps, "tl", 6, 12, rng);
    AttentionPool ap(ps, "ap", 6, 5, rng);
    Tensor x = testutil::random_tensor({2, 6, 4}, rng, false);  // [B, F, T]
    auto loss = [&] {
        Tensor seq = transpose_12(x);        // [B, T, F]
        Tensor h = tl.forward(seq);          // [B, T, F]
        Tensor ctx = ap.forward(transpose_12(h));  // [B, H]
        return mean_all(mul(ctx, ctx));
    };
    std::vector<Tensor> leaves;
    for (auto& [name, t] : ps.items()) leaves.push_back(t);
    auto res = testutil::finite_diff_check(loss, leaves);
    CHECK(res.max_rel_err < 1e-4);
}
