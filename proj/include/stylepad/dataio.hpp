#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stylepad/rng.hpp"

namespace stylepad {

// One windowed sensor sample: K channels x L steps.
struct TimeSeriesInstance {
    std::vector<double> values;  // row-major [K, L]
    int64_t k_channels = 0;
    int64_t length = 0;
    int64_t class_label = 0;
    std::string domain_tag;
    int origin_flag = 1;  // 1 = original, 0 = synthetic
    std::string instance_id;

    double& at(int64_t c, int64_t l) { return values[static_cast<size_t>(c * length + l)]; }
    double at(int64_t c, int64_t l) const { return values[static_cast<size_t>(c * length + l)]; }
};

struct NormStats {
    std::vector<double> mean;  // per channel
    std::vector<double> std;   // per channel
};

struct DatasetSplit {
    std::vector<TimeSeriesInstance> train;
    std::vector<TimeSeriesInstance> val;
    std::vector<TimeSeriesInstance> test;
    std::vector<TimeSeriesInstance> target_test;
    std::vector<std::string> source_domains;
    std::string target_domain;
    int64_t n_classes = 0;
    int64_t k_channels = 0;
    int64_t length = 0;
    std::optional<NormStats> stats;  // present after normalize()
};

struct SynthBenchSpec {
    int64_t n_classes = 4;
    int64_t n_domains = 4;
    int64_t samples_per_class_per_domain = 20;
    int64_t k_channels = 3;
    int64_t length = 64;
    double noise_level = 0.05;
    uint64_t seed = 0;
};

// Sliding windows over a [K, len] series. stride = round(window_len * (1 - overlap));
// trailing remainder is dropped; a series shorter than one window yields no windows.
std::vector<std::vector<double>> segment_windows(const std::vector<double>& series,
                                                 int64_t k_channels, int64_t window_len,
                                                 double overlap_fraction);

// Per-channel z-score. Statistics come from the train split only and are
// applied to every split; zero-variance channels clamp std to 1e-8 (warned on
// stderr). Returns the same split with stats recorded.
DatasetSplit normalize(DatasetSplit split);
TimeSeriesInstance apply_normalization(const TimeSeriesInstance& inst, const NormStats& stats);
TimeSeriesInstance denormalize(const TimeSeriesInstance& inst, const NormStats& stats);

// Leave-one-group-out: instances whose domain maps to `target_group` become
// target_test; the rest are split 6:2:2 per class (largest-remainder, then
// deterministic shuffle by `seed`).
DatasetSplit leave_one_out_split(const std::vector<TimeSeriesInstance>& instances,
                                 const std::map<std::string, std::string>& groups,
                                 const std::string& target_group, int64_t n_classes,
                                 uint64_t seed);

// Multi-domain waveform benchmark. Class = waveform family, domain = style
// transform (frequency multiplier, amplitude, phase offset, noise floor).
std::vector<TimeSeriesInstance> synth_benchmark_generate(const SynthBenchSpec& spec);
int64_t synth_benchmark_max_classes();

// Stratified per-class subsampling of the train split; val/test untouched.
DatasetSplit subsample_fraction(const DatasetSplit& split, double fraction, uint64_t seed);

// ---- on-disk form ----

struct DatasetManifest {
    std::string name;
    int64_t n_classes = 0;
    int64_t k_channels = 0;
    int64_t length = 0;
    double window_overlap = 0.0;
    std::vector<std::string> channels;
    std::vector<std::string> domains;
    std::string target_domain;
    // split name -> {data file, labels file}, paths relative to the manifest
    std::map<std::string, std::pair<std::string, std::string>> files;
};

void save_instances(const std::string& data_path, const std::string& labels_path,
                    const std::vector<TimeSeriesInstance>& instances);
std::vector<TimeSeriesInstance> load_instances(const std::string& data_path,
                                               const std::string& labels_path);

void save_split(const std::string& dir, const std::string& name, const DatasetSplit& split,
                double window_overlap = 0.0);
DatasetSplit load_split(const std::string& manifest_path);
DatasetManifest read_manifest(const std::string& manifest_path);

}  // namespace stylepad
