#include "stylepad/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace stylepad {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

uint64_t splitmix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

uint64_t derive_key(std::string_view id, uint64_t seed) {
    return splitmix64(splitmix64(fnv1a(id) + kGolden) ^ splitmix64(seed + kGolden));
}

}  // namespace

RngStream::RngStream(std::string_view id, uint64_t seed)
    : id_(id), seed_(seed), key_(derive_key(id, seed)) {}

RngStream::RngStream(std::string id, uint64_t seed, uint64_t key)
    : id_(std::move(id)), seed_(seed), key_(key) {}

uint64_t RngStream::next_u64() {
    return splitmix64(key_ + (++counter_) * kGolden);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw std::invalid_argument("RngStream::uniform_int: lo > hi");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    // Rejection-free modulo; bias is negligible for span << 2^64 and the
    // result stays identical on every platform.
    return lo + static_cast<int64_t>(next_u64() % span);
}

void RngStream::fill_normal(std::vector<double>& out) {
    for (double& v : out) v = normal();
}

void RngStream::fill_uniform(std::vector<double>& out) {
    for (double& v : out) v = uniform();
}

RngStream RngStream::sub(std::string_view child_id) const {
    std::string id = id_ + "/" + std::string(child_id);
    return RngStream(id, seed_, derive_key(id, seed_));
}

RngStream RngStream::sub(uint64_t child_index) const {
    std::string id = id_ + "/" + std::to_string(child_index);
    return RngStream(id, seed_, derive_key(id, seed_));
}

}  // namespace stylepad
