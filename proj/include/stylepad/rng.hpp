#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace stylepad {

// Counter-based PRNG. Draws depend only on (stream id, seed, counter), so
// sequences are reproducible across runs and independent of call sites.
// No <random> distributions are used anywhere: their output is not
// specified bit-for-bit by the standard.
class RngStream {
public:
    RngStream(std::string_view id, uint64_t seed);

    uint64_t next_u64();
    double uniform();                       // [0, 1)
    double normal();                        // standard normal, Box-Muller
    int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive range

    void fill_normal(std::vector<double>& out);
    void fill_uniform(std::vector<double>& out);

    // Derived stream with an independent draw sequence.
    RngStream sub(std::string_view child_id) const;
    RngStream sub(uint64_t child_index) const;

    const std::string& id() const { return id_; }
    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }

private:
    RngStream(std::string id, uint64_t seed, uint64_t key);

    std::string id_;
    uint64_t seed_ = 0;
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace stylepad
