#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stylepad {

// Instance-level activity style produced by the style conditioner.
struct StyleVector {
    std::vector<double> values;  // length H
    int64_t class_label = 0;
    std::string source_instance_id;
    std::string domain_tag;
};

// Class-partitioned collection of style vectors: one bucket per class.
class StyleStore {
public:
    StyleStore() = default;
    StyleStore(int64_t n_classes, int64_t h);

    void add(StyleVector v);
    const std::vector<StyleVector>& bucket(int64_t c) const;
    int64_t n_classes() const { return static_cast<int64_t>(buckets_.size()); }
    int64_t h() const { return h_; }
    int64_t total_count() const;

    void save(const std::string& data_path, const std::string& index_path) const;
    static StyleStore load(const std::string& data_path, const std::string& index_path,
                           int64_t n_classes);

private:
    int64_t h_ = 0;
    std::vector<std::vector<StyleVector>> buckets_;
};

}  // namespace stylepad
