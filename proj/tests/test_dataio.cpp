#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "stylepad/dataio.hpp"
#include "stylepad/optim.hpp"
#include "stylepad/tensor.hpp"

using namespace stylepad;

namespace {

std::vector<double> ramp_series(int64_t k, int64_t len) {
    std::vector<double> s(static_cast<size_t>(k * len));
    for (int64_t c = 0; c < k; ++c)
        for (int64_t l = 0; l < len; ++l)
            s[static_cast<size_t>(c * len + l)] = static_cast<double>(c * len + l);
    return s;
}

}  // namespace

TEST_CASE("segment_windows: 1000/500 with 50% overlap starts at 0,250,500") {
    auto windows = segment_windows(ramp_series(1, 1000), 1, 500, 0.5);
    REQUIRE(windows.size() == 3);
    CHECK(windows[0][0] == 0.0);
    CHECK(windows[1][0] == 250.0);
    CHECK(windows[2][0] == 500.0);
}

TEST_CASE("segment_windows: exact fits") {
    CHECK(segment_windows(ramp_series(1, 125), 1, 125, 0.0).size() == 1);
    CHECK(segment_windows(ramp_series(1, 1024), 1, 512, 0.0).size() == 2);
    CHECK(segment_windows(ramp_series(1, 100), 1, 125, 0.0).empty());
}

TEST_CASE("segment_windows: zero-overlap windows concatenate to a prefix of the series") {
    auto series = ramp_series(2, 103);
    auto windows = segment_windows(series, 2, 10, 0.0);
    REQUIRE(windows.size() == 10);
    for (size_t wi = 0; wi < windows.size(); ++wi)
        for (int64_t c = 0; c < 2; ++c)
            for (int64_t l = 0; l < 10; ++l)
                CHECK(windows[wi][static_cast<size_t>(c * 10 + l)] ==
                      series[static_cast<size_t>(c * 103 + wi * 10 + l)]);
    CHECK_THROWS_AS(segment_windows(series, 2, 10, 1.0), std::invalid_argument);
}

namespace {

std::vector<TimeSeriesInstance> tiny_instances(int64_t per_domain_class, int64_t n_domains,
                                               int64_t n_classes, uint64_t seed) {
    SynthBenchSpec spec;
    spec.n_classes = n_classes;
    spec.n_domains = n_domains;
    spec.samples_per_class_per_domain = per_domain_class;
    spec.k_channels = 2;
    spec.length = 16;
    spec.seed = seed;
    return synth_benchmark_generate(spec);
}

std::map<std::string, std::string> identity_groups(int64_t n_domains) {
    std::map<std::string, std::string> g;
    for (int64_t d = 0; d < n_domains; ++d) g["d" + std::to_string(d)] = "d" + std::to_string(d);
    return g;
}

}  // namespace

TEST_CASE("normalize: train statistics, zero mean, round trip") {
    auto inst = tiny_instances(10, 2, 3, 5);
    auto split = leave_one_out_split(inst, identity_groups(2), "d1", 3, 1);
    auto normalized = normalize(split);
    REQUIRE(normalized.stats.has_value());

    // per-channel train mean ~ 0
    int64_t K = normalized.k_channels, L = normalized.length;
    for (int64_t c = 0; c < K; ++c) {
        double s = 0.0;
        for (const auto& i : normalized.train)
            for (int64_t l = 0; l < L; ++l) s += i.at(c, l);
        s /= static_cast<double>(normalized.train.size() * L);
        CHECK(std::abs(s) < 1e-10);
    }

    // held-out instances transformed with train statistics, not their own
    const auto& st = *normalized.stats;
    TimeSeriesInstance manually = apply_normalization(split.target_test[0], st);
    for (size_t i = 0; i < manually.values.size(); ++i)
        CHECK(manually.values[i] == normalized.target_test[0].values[i]);

    // round trip
    TimeSeriesInstance back = denormalize(normalized.train[0], st);
    for (size_t i = 0; i < back.values.size(); ++i)
        CHECK(back.values[i] == doctest::Approx(split.train[0].values[i]).epsilon(1e-10));
}

TEST_CASE("normalize: constant channel clamps to zeros") {
    std::vector<TimeSeriesInstance> insts(3);
    for (auto& i : insts) {
        i.k_channels = 1;
        i.length = 4;
        i.values.assign(4, 7.5);
        i.class_label = 0;
        i.domain_tag = "d0";
    }
    DatasetSplit split;
    split.train = insts;
    split.n_classes = 1;
    split.k_channels = 1;
    split.length = 4;
    auto out = normalize(split);
    for (double v : out.train[0].values) CHECK(v == 0.0);
}

TEST_CASE("leave_one_out_split: target group held out, 6:2:2 within one instance") {
    auto inst = tiny_instances(10, 4, 3, 7);
    auto groups = identity_groups(4);
    auto split = leave_one_out_split(inst, groups, "d0", 3, 3);
    CHECK(split.target_domain == "d0");
    CHECK(split.source_domains == std::vector<std::string>{"d1", "d2", "d3"});
    CHECK(split.target_test.size() == 30);
    int64_t source_total = static_cast<int64_t>(split.train.size() + split.val.size() +
                                                split.test.size());
    CHECK(source_total == 90);

    for (const auto& i : split.train) CHECK(i.domain_tag != "d0");
    for (const auto& i : split.val) CHECK(i.domain_tag != "d0");

    // per-class ratios within +-1 of 6:2:2 (30 source instances per class)
    for (int64_t c = 0; c < 3; ++c) {
        auto count = [&](const std::vector<TimeSeriesInstance>& v) {
            int64_t n = 0;
            for (const auto& i : v)
                if (i.class_label == c) ++n;
            return n;
        };
        CHECK(std::abs(count(split.train) - 18) <= 1);
        CHECK(std::abs(count(split.val) - 6) <= 1);
        CHECK(std::abs(count(split.test) - 6) <= 1);
    }

    // no overlap between parts
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.val, &split.test, &split.target_test})
        for (const auto& i : *part) {
            CHECK(seen.insert(i.instance_id).second);
        }

    CHECK_THROWS_AS(leave_one_out_split(inst, groups, "nope", 3, 3), std::invalid_argument);
}

TEST_CASE("synth benchmark: deterministic, labeled, exact counts") {
    SynthBenchSpec spec;
    spec.n_classes = 4;
    spec.n_domains = 3;
    spec.samples_per_class_per_domain = 5;
    spec.k_channels = 3;
    spec.length = 32;
    spec.seed = 9;
    auto a = synth_benchmark_generate(spec);
    auto b = synth_benchmark_generate(spec);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].values == b[i].values);
        CHECK(a[i].class_label == b[i].class_label);
    }
    std::map<std::pair<int64_t, std::string>, int64_t> counts;
    for (const auto& i : a) counts[{i.class_label, i.domain_tag}]++;
    CHECK(counts.size() == 12);
    for (const auto& [k, v] : counts) CHECK(v == 5);

    spec.n_classes = synth_benchmark_max_classes() + 1;
    CHECK_THROWS_AS(synth_benchmark_generate(spec), std::invalid_argument);
}

TEST_CASE("synth benchmark: linear probe separates classes within one domain") {
    SynthBenchSpec spec;
    spec.n_classes = 4;
    spec.n_domains = 1;
    spec.samples_per_class_per_domain = 30;
    spec.k_channels = 3;
    spec.length = 64;
    spec.noise_level = 0.05;
    spec.seed = 11;
    auto inst = synth_benchmark_generate(spec);

    int64_t dim = spec.k_channels * spec.length;
    int64_t n = static_cast<int64_t>(inst.size());
    std::vector<double> xs;
    std::vector<int64_t> ys;
    for (const auto& i : inst) {
        xs.insert(xs.end(), i.values.begin(), i.values.end());
        ys.push_back(i.class_label);
    }
    Tensor x = Tensor::from_data({n, dim}, std::move(xs));
    ParameterSet ps;
    Tensor w = ps.create("w", Tensor::zeros({dim, spec.n_classes}, true));
    Tensor b = ps.create("b", Tensor::zeros({spec.n_classes}, true));
    AdamState adam = make_adam(0.05);
    for (int step = 0; step < 120; ++step) {
        zero_grads(ps);
        Tensor logits = add_rowvec(matmul(x, w), b);
        reverse_gradient(softmax_cross_entropy(logits, ys), ps);
        adam_step(ps, adam);
    }
    NoGradGuard ng;
    Tensor logits = add_rowvec(matmul(x, w), b);
    int64_t correct = 0;
    for (int64_t i = 0; i < n; ++i) {
        int64_t best = 0;
        for (int64_t c = 1; c < spec.n_classes; ++c)
            if (logits.data()[static_cast<size_t>(i * spec.n_classes + c)] >
                logits.data()[static_cast<size_t>(i * spec.n_classes + best)])
                best = c;
        if (best == ys[static_cast<size_t>(i)]) ++correct;
    }
    double acc = static_cast<double>(correct) / static_cast<double>(n);
    CHECK(acc > 0.9);
}

TEST_CASE("subsample_fraction: stratified, deterministic, validated") {
    auto inst = tiny_instances(20, 2, 3, 13);
    auto split = leave_one_out_split(inst, identity_groups(2), "d1", 3, 5);
    int64_t train_per_class = 0;
    for (const auto& i : split.train)
        if (i.class_label == 0) ++train_per_class;

    auto sub = subsample_fraction(split, 0.5, 17);
    int64_t kept = 0;
    for (const auto& i : sub.train)
        if (i.class_label == 0) ++kept;
    CHECK(kept == std::llround(0.5 * static_cast<double>(train_per_class)));

    auto same = subsample_fraction(split, 0.5, 17);
    REQUIRE(same.train.size() == sub.train.size());
    for (size_t i = 0; i < sub.train.size(); ++i)
        CHECK(same.train[i].instance_id == sub.train[i].instance_id);

    auto other = subsample_fraction(split, 0.5, 18);
    bool differs = false;
    for (size_t i = 0; i < sub.train.size(); ++i)
        if (other.train[i].instance_id != sub.train[i].instance_id) differs = true;
    CHECK(differs);
    CHECK(other.train.size() == sub.train.size());

    auto full = subsample_fraction(split, 1.0, 17);
    CHECK(full.train.size() == split.train.size());

    CHECK_THROWS_AS(subsample_fraction(split, 0.001, 17), std::invalid_argument);
    CHECK_THROWS_AS(subsample_fraction(split, 1.5, 17), std::invalid_argument);
}

TEST_CASE("split storage round-trips through manifest, bin and csv") {
    namespace fs = std::filesystem;
    auto inst = tiny_instances(6, 2, 2, 21);
    auto split = normalize(leave_one_out_split(inst, identity_groups(2), "d1", 2, 7));
    auto dir = fs::temp_directory_path() / "stylepad_dataio_test";
    fs::remove_all(dir);
    save_split(dir.string(), "tiny", split, 0.0);
    auto loaded = load_split((dir / "manifest.json").string());
    CHECK(loaded.n_classes == split.n_classes);
    CHECK(loaded.k_channels == split.k_channels);
    CHECK(loaded.length == split.length);
    REQUIRE(loaded.train.size() == split.train.size());
    REQUIRE(loaded.target_test.size() == split.target_test.size());
    for (size_t i = 0; i < split.train.size(); ++i) {
        CHECK(loaded.train[i].values == split.train[i].values);
        CHECK(loaded.train[i].class_label == split.train[i].class_label);
        CHECK(loaded.train[i].domain_tag == split.train[i].domain_tag);
        CHECK(loaded.train[i].origin_flag == 1);
    }
    REQUIRE(loaded.stats.has_value());
    CHECK(loaded.stats->mean == split.stats->mean);
    fs::remove_all(dir);
}
