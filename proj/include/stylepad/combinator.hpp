#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "stylepad/rng.hpp"
#include "stylepad/styles.hpp"

namespace stylepad {

// Nonempty same-class subset of style vectors used as one fused sampling
// condition. Members are drawn without replacement and kept in ascending
// source order.
struct StyleCombination {
    int64_t class_label = 0;
    std::vector<StyleVector> members;
    uint64_t combination_id = 0;
};

// Probabilities over the number of fused styles (1..o).
struct FuseCountDistribution {
    std::vector<double> p;
    static FuseCountDistribution uniform(int64_t o);
    void validate() const;
};

struct GenerationBudget {
    double kappa = 1.0;  // synthetic-to-original ratio
    int64_t o = 5;       // max styles per combination
    FuseCountDistribution fuse_dist;

    static GenerationBudget make(double kappa, int64_t o);
    void validate() const;
};

// Number of nonempty subsets of a k-element set with size <= o:
// sum_{m=1..min(o,k)} C(k,m); equals 2^k - 1 when o >= k.
int64_t count_combinations(int64_t k, int64_t o);

// Ordered enumeration (size 1 subsets first, lexicographic within a size),
// stopping after `limit` combinations.
std::vector<StyleCombination> enumerate_combinations(const StyleStore& store, int64_t c,
                                                     int64_t o, int64_t limit);

// m ~ fuse_dist truncated to min(o, |S^c|) and renormalized, then a uniform
// m-subset of S^c without replacement.
StyleCombination draw_combination(const StyleStore& store, int64_t c,
                                  const GenerationBudget& budget, RngStream& rng,
                                  uint64_t combination_id = 0);

// round(kappa * B) combinations with per-class counts proportional to
// `batch_class_counts` (round-half-up total; remainders round-robin over
// ascending class ids). combination_id runs 0..n-1 in output order.
std::vector<StyleCombination> assemble_batch_conditions(
    const StyleStore& store, const std::map<int64_t, int64_t>& batch_class_counts,
    const GenerationBudget& budget, RngStream& rng);

}  // namespace stylepad
