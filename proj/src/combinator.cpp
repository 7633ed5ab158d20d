#include "stylepad/combinator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "stylepad/checkpoint.hpp"

namespace stylepad {

// ---------------------------------------------------------------------------
// StyleStore
// ---------------------------------------------------------------------------

StyleStore::StyleStore(int64_t n_classes, int64_t h) : h_(h) {
    if (n_classes < 1) throw std::invalid_argument("StyleStore: n_classes must be >= 1");
    buckets_.resize(static_cast<size_t>(n_classes));
}

void StyleStore::add(StyleVector v) {
    if (v.class_label < 0 || v.class_label >= n_classes())
        throw std::out_of_range("StyleStore::add: class label " + std::to_string(v.class_label) +
                                " outside [0," + std::to_string(n_classes()) + ")");
    if (static_cast<int64_t>(v.values.size()) != h_)
        throw std::invalid_argument("StyleStore::add: style length " +
                                    std::to_string(v.values.size()) + " != H=" +
                                    std::to_string(h_));
    buckets_[static_cast<size_t>(v.class_label)].push_back(std::move(v));
}

const std::vector<StyleVector>& StyleStore::bucket(int64_t c) const {
    if (c < 0 || c >= n_classes())
        throw std::out_of_range("StyleStore::bucket: unknown class " + std::to_string(c));
    return buckets_[static_cast<size_t>(c)];
}

int64_t StyleStore::total_count() const {
    int64_t n = 0;
    for (const auto& b : buckets_) n += static_cast<int64_t>(b.size());
    return n;
}

void StyleStore::save(const std::string& data_path, const std::string& index_path) const {
    NamedTensor values;
    values.name = "styles";
    values.shape = {total_count(), h_};
    std::ofstream csv(index_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("StyleStore::save: cannot write " + index_path);
    csv << "instance_id,class,domain\n";
    for (const auto& bucket : buckets_)
        for (const auto& v : bucket) {
            values.data.insert(values.data.end(), v.values.begin(), v.values.end());
            csv << v.source_instance_id << "," << v.class_label << "," << v.domain_tag << "\n";
        }
    save_named_tensors(data_path, {values});
}

StyleStore StyleStore::load(const std::string& data_path, const std::string& index_path,
                            int64_t n_classes) {
    auto tensors = load_named_tensors(data_path);
    if (tensors.size() != 1 || tensors[0].name != "styles" || tensors[0].shape.size() != 2)
        throw std::runtime_error("StyleStore::load: " + data_path + " is not a style container");
    int64_t n = tensors[0].shape[0], h = tensors[0].shape[1];
    StyleStore store(n_classes, h);
    std::ifstream csv(index_path);
    if (!csv) throw std::runtime_error("StyleStore::load: cannot open " + index_path);
    std::string line;
    std::getline(csv, line);
    int64_t row = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, cls, dom;
        std::getline(ss, id, ',');
        std::getline(ss, cls, ',');
        std::getline(ss, dom, ',');
        StyleVector v;
        v.source_instance_id = id;
        v.class_label = std::stoll(cls);
        v.domain_tag = dom;
        v.values.assign(tensors[0].data.begin() + row * h, tensors[0].data.begin() + (row + 1) * h);
        store.add(std::move(v));
        ++row;
    }
    if (row != n)
        throw std::runtime_error("StyleStore::load: index rows do not match tensor count");
    return store;
}

// ---------------------------------------------------------------------------
// combination space
// ---------------------------------------------------------------------------

FuseCountDistribution FuseCountDistribution::uniform(int64_t o) {
    FuseCountDistribution d;
    d.p.assign(static_cast<size_t>(o), 1.0 / static_cast<double>(o));
    return d;
}

void FuseCountDistribution::validate() const {
    if (p.empty()) throw std::invalid_argument("FuseCountDistribution: empty");
    double s = 0.0;
    for (double x : p) {
        if (x < 0.0) throw std::invalid_argument("FuseCountDistribution: negative probability");
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("FuseCountDistribution: probabilities sum to " +
                                    std::to_string(s) + ", expected 1");
}

GenerationBudget GenerationBudget::make(double kappa, int64_t o) {
    GenerationBudget b;
    b.kappa = kappa;
    b.o = o;
    b.fuse_dist = FuseCountDistribution::uniform(o);
    b.validate();
    return b;
}

void GenerationBudget::validate() const {
    if (kappa <= 0.0) throw std::invalid_argument("GenerationBudget: kappa must be > 0");
    if (o < 1) throw std::invalid_argument("GenerationBudget: o must be >= 1");
    if (static_cast<int64_t>(fuse_dist.p.size()) != o)
        throw std::invalid_argument("GenerationBudget: fuse_dist length " +
                                    std::to_string(fuse_dist.p.size()) + " != o=" +
                                    std::to_string(o));
    fuse_dist.validate();
}

int64_t count_combinations(int64_t k, int64_t o) {
    if (k < 0) throw std::invalid_argument("count_combinations: k must be >= 0");
    if (o < 1) throw std::invalid_argument("count_combinations: o must be >= 1");
    int64_t top = std::min(o, k);
    int64_t total = 0;
    // C(k, m) built incrementally; values stay far below 2^62 for k <= 20
    int64_t binom = 1;
    for (int64_t m = 1; m <= top; ++m) {
        binom = binom * (k - m + 1) / m;
        total += binom;
    }
    return total;
}

namespace {

StyleCombination make_combination(const StyleStore& store, int64_t c,
                                  const std::vector<int64_t>& idx, uint64_t id) {
    StyleCombination comb;
    comb.class_label = c;
    comb.combination_id = id;
    const auto& bucket = store.bucket(c);
    comb.members.reserve(idx.size());
    for (int64_t i : idx) comb.members.push_back(bucket[static_cast<size_t>(i)]);
    return comb;
}

}  // namespace

std::vector<StyleCombination> enumerate_combinations(const StyleStore& store, int64_t c,
                                                     int64_t o, int64_t limit) {
    if (limit < 1) throw std::invalid_argument("enumerate_combinations: limit must be >= 1");
    int64_t k = static_cast<int64_t>(store.bucket(c).size());
    std::vector<StyleCombination> out;
    uint64_t id = 0;
    for (int64_t m = 1; m <= std::min(o, k); ++m) {
        std::vector<int64_t> idx(static_cast<size_t>(m));
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            out.push_back(make_combination(store, c, idx, id++));
            if (static_cast<int64_t>(out.size()) >= limit) return out;
            // next lexicographic m-combination of {0..k-1}
            int64_t i = m - 1;
            while (i >= 0 && idx[static_cast<size_t>(i)] == k - m + i) --i;
            if (i < 0) break;
            ++idx[static_cast<size_t>(i)];
            for (int64_t j = i + 1; j < m; ++j)
                idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
        }
    }
    return out;
}

StyleCombination draw_combination(const StyleStore& store, int64_t c,
                                  const GenerationBudget& budget, RngStream& rng,
                                  uint64_t combination_id) {
    budget.validate();
    int64_t k = static_cast<int64_t>(store.bucket(c).size());
    if (k == 0)
        throw std::invalid_argument("draw_combination: class " + std::to_string(c) +
                                    " has no styles");
    int64_t top = std::min(budget.o, k);
    double total = 0.0;
    for (int64_t m = 1; m <= top; ++m) total += budget.fuse_dist.p[static_cast<size_t>(m - 1)];
    double u = rng.uniform() * total;
    int64_t m = top;
    double acc = 0.0;
    for (int64_t i = 1; i <= top; ++i) {
        acc += budget.fuse_dist.p[static_cast<size_t>(i - 1)];
        if (u < acc) {
            m = i;
            break;
        }
    }
    // uniform m-subset without replacement: partial Fisher-Yates over indices
    std::vector<int64_t> idx(static_cast<size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    for (int64_t i = 0; i < m; ++i) {
        int64_t j = rng.uniform_int(i, k - 1);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    std::vector<int64_t> chosen(idx.begin(), idx.begin() + m);
    std::sort(chosen.begin(), chosen.end());
    return make_combination(store, c, chosen, combination_id);
}

std::vector<StyleCombination> assemble_batch_conditions(
    const StyleStore& store, const std::map<int64_t, int64_t>& batch_class_counts,
    const GenerationBudget& budget, RngStream& rng) {
    budget.validate();
    int64_t B = 0;
    for (const auto& [c, n] : batch_class_counts) {
        if (n < 0) throw std::invalid_argument("assemble_batch_conditions: negative count");
        B += n;
    }
    if (B == 0) return {};
    int64_t total = static_cast<int64_t>(std::floor(budget.kappa * static_cast<double>(B) + 0.5));
    // proportional allocation, floor first, remainder round-robin over classes
    std::vector<std::pair<int64_t, int64_t>> alloc;  // class -> count
    int64_t used = 0;
    for (const auto& [c, n] : batch_class_counts) {
        if (n == 0) continue;
        if (store.bucket(c).empty())
            throw std::invalid_argument("assemble_batch_conditions: class " + std::to_string(c) +
                                        " requested but its style bucket is empty");
        int64_t share = static_cast<int64_t>(
            std::floor(static_cast<double>(total) * static_cast<double>(n) /
                       static_cast<double>(B)));
        alloc.emplace_back(c, share);
        used += share;
    }
    size_t rr = 0;
    while (used < total && !alloc.empty()) {
        alloc[rr % alloc.size()].second += 1;
        ++rr;
        ++used;
    }
    std::vector<StyleCombination> out;
    out.reserve(static_cast<size_t>(total));
    uint64_t id = 0;
    for (const auto& [c, count] : alloc)
        for (int64_t i = 0; i < count; ++i)
            out.push_back(draw_combination(store, c, budget, rng, id++));
    return out;
}

}  // namespace stylepad
