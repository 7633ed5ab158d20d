#include "stylepad/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "stylepad/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace stylepad {

std::vector<std::vector<double>> segment_windows(const std::vector<double>& series,
                                                 int64_t k_channels, int64_t window_len,
                                                 double overlap_fraction) {
    if (k_channels < 1 || window_len < 1)
        throw std::invalid_argument("segment_windows: k_channels and window_len must be >= 1");
    if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
        throw std::invalid_argument("segment_windows: overlap_fraction must be in [0,1)");
    if (series.size() % static_cast<size_t>(k_channels) != 0)
        throw std::invalid_argument("segment_windows: series length not divisible by channels");
    int64_t len = static_cast<int64_t>(series.size()) / k_channels;
    std::vector<std::vector<double>> windows;
    if (len < window_len) return windows;
    int64_t stride = std::llround(static_cast<double>(window_len) * (1.0 - overlap_fraction));
    if (stride < 1) stride = 1;
    for (int64_t start = 0; start + window_len <= len; start += stride) {
        std::vector<double> w(static_cast<size_t>(k_channels * window_len));
        for (int64_t c = 0; c < k_channels; ++c)
            for (int64_t l = 0; l < window_len; ++l)
                w[static_cast<size_t>(c * window_len + l)] =
                    series[static_cast<size_t>(c * len + start + l)];
        windows.push_back(std::move(w));
    }
    return windows;
}

namespace {

NormStats compute_stats(const std::vector<TimeSeriesInstance>& train, int64_t K) {
    NormStats st;
    st.mean.assign(static_cast<size_t>(K), 0.0);
    st.std.assign(static_cast<size_t>(K), 0.0);
    if (train.empty()) throw std::invalid_argument("normalize: train split is empty");
    int64_t L = train.front().length;
    double n = static_cast<double>(train.size()) * static_cast<double>(L);
    for (const auto& inst : train)
        for (int64_t c = 0; c < K; ++c)
            for (int64_t l = 0; l < L; ++l) st.mean[static_cast<size_t>(c)] += inst.at(c, l);
    for (int64_t c = 0; c < K; ++c) st.mean[static_cast<size_t>(c)] /= n;
    for (const auto& inst : train)
        for (int64_t c = 0; c < K; ++c)
            for (int64_t l = 0; l < L; ++l) {
                double d = inst.at(c, l) - st.mean[static_cast<size_t>(c)];
                st.std[static_cast<size_t>(c)] += d * d;
            }
    for (int64_t c = 0; c < K; ++c) {
        double v = std::sqrt(st.std[static_cast<size_t>(c)] / n);
        if (v < 1e-8) {
            std::cerr << "[stylepad] warning: channel " << c
                      << " has zero variance on train; clamping std to 1e-8\n";
            v = 1e-8;
        }
        st.std[static_cast<size_t>(c)] = v;
    }
    return st;
}

}  // namespace

TimeSeriesInstance apply_normalization(const TimeSeriesInstance& inst, const NormStats& stats) {
    TimeSeriesInstance out = inst;
    for (int64_t c = 0; c < inst.k_channels; ++c)
        for (int64_t l = 0; l < inst.length; ++l)
            out.at(c, l) = (inst.at(c, l) - stats.mean[static_cast<size_t>(c)]) /
                           stats.std[static_cast<size_t>(c)];
    return out;
}

TimeSeriesInstance denormalize(const TimeSeriesInstance& inst, const NormStats& stats) {
    TimeSeriesInstance out = inst;
    for (int64_t c = 0; c < inst.k_channels; ++c)
        for (int64_t l = 0; l < inst.length; ++l)
            out.at(c, l) = inst.at(c, l) * stats.std[static_cast<size_t>(c)] +
                           stats.mean[static_cast<size_t>(c)];
    return out;
}

DatasetSplit normalize(DatasetSplit split) {
    NormStats st = compute_stats(split.train, split.k_channels);
    auto apply_all = [&](std::vector<TimeSeriesInstance>& v) {
        for (auto& inst : v) inst = apply_normalization(inst, st);
    };
    apply_all(split.train);
    apply_all(split.val);
    apply_all(split.test);
    apply_all(split.target_test);
    split.stats = st;
    return split;
}

DatasetSplit leave_one_out_split(const std::vector<TimeSeriesInstance>& instances,
                                 const std::map<std::string, std::string>& groups,
                                 const std::string& target_group, int64_t n_classes,
                                 uint64_t seed) {
    std::set<std::string> group_names;
    for (const auto& [dom, grp] : groups) group_names.insert(grp);
    if (!group_names.count(target_group))
        throw std::invalid_argument("leave_one_out_split: unknown group \"" + target_group + "\"");
    if (group_names.size() < 2)
        throw std::invalid_argument("leave_one_out_split: need at least 2 groups");

    DatasetSplit split;
    split.n_classes = n_classes;
    split.target_domain = target_group;
    std::set<std::string> source_doms;
    std::vector<std::vector<const TimeSeriesInstance*>> per_class(static_cast<size_t>(n_classes));
    for (const auto& inst : instances) {
        auto it = groups.find(inst.domain_tag);
        if (it == groups.end())
            throw std::invalid_argument("leave_one_out_split: instance domain \"" +
                                        inst.domain_tag + "\" has no group assignment");
        if (inst.class_label < 0 || inst.class_label >= n_classes)
            throw std::invalid_argument("leave_one_out_split: class label " +
                                        std::to_string(inst.class_label) + " outside [0," +
                                        std::to_string(n_classes) + ")");
        if (it->second == target_group) {
            split.target_test.push_back(inst);
        } else {
            per_class[static_cast<size_t>(inst.class_label)].push_back(&inst);
            source_doms.insert(inst.domain_tag);
        }
    }
    split.source_domains.assign(source_doms.begin(), source_doms.end());
    if (!instances.empty()) {
        split.k_channels = instances.front().k_channels;
        split.length = instances.front().length;
    }

    RngStream rng("leave_one_out_split/" + target_group, seed);
    for (int64_t c = 0; c < n_classes; ++c) {
        auto& bucket = per_class[static_cast<size_t>(c)];
        // deterministic shuffle
        for (size_t i = bucket.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(bucket[i - 1], bucket[j]);
        }
        // largest-remainder 6:2:2 allocation
        int64_t n = static_cast<int64_t>(bucket.size());
        double parts[3] = {0.6, 0.2, 0.2};
        int64_t counts[3];
        double rema[3];
        int64_t used = 0;
        for (int p = 0; p < 3; ++p) {
            double exact = parts[p] * static_cast<double>(n);
            counts[p] = static_cast<int64_t>(std::floor(exact));
            rema[p] = exact - static_cast<double>(counts[p]);
            used += counts[p];
        }
        while (used < n) {
            int best = 0;
            for (int p = 1; p < 3; ++p)
                if (rema[p] > rema[best]) best = p;
            counts[best] += 1;
            rema[best] = -1.0;
            ++used;
        }
        int64_t idx = 0;
        for (int64_t i = 0; i < counts[0]; ++i) split.train.push_back(*bucket[static_cast<size_t>(idx++)]);
        for (int64_t i = 0; i < counts[1]; ++i) split.val.push_back(*bucket[static_cast<size_t>(idx++)]);
        for (int64_t i = 0; i < counts[2]; ++i) split.test.push_back(*bucket[static_cast<size_t>(idx++)]);
    }
    return split;
}

int64_t synth_benchmark_max_classes() { return 6; }

namespace {

double waveform(int64_t family, double theta, double tau) {
    switch (family) {
        case 0: return std::sin(theta);
        case 1: return std::tanh(4.0 * std::sin(theta));  // smoothed square
        case 2: {
            double f = theta / (2.0 * M_PI);
            return 2.0 * (f - std::floor(f)) - 1.0;  // sawtooth
        }
        case 3: return std::sin(theta * (1.0 + 0.5 * tau));  // chirp
        case 4: {
            double f = theta / (2.0 * M_PI);
            return 2.0 * std::abs(2.0 * (f - std::floor(f)) - 1.0) - 1.0;  // triangle
        }
        case 5: return std::sin(theta) * (0.6 + 0.4 * std::sin(theta * 0.25));  // AM sine
        default: throw std::invalid_argument("waveform: unknown family");
    }
}

}  // namespace

std::vector<TimeSeriesInstance> synth_benchmark_generate(const SynthBenchSpec& spec) {
    if (spec.n_classes < 1 || spec.n_domains < 1 || spec.samples_per_class_per_domain < 1 ||
        spec.k_channels < 1 || spec.length < 1)
        throw std::invalid_argument("synth_benchmark_generate: all counts must be >= 1");
    if (spec.n_classes > synth_benchmark_max_classes())
        throw std::invalid_argument("synth_benchmark_generate: n_classes " +
                                    std::to_string(spec.n_classes) + " exceeds the " +
                                    std::to_string(synth_benchmark_max_classes()) +
                                    " implemented waveform families");
    std::vector<TimeSeriesInstance> out;
    out.reserve(static_cast<size_t>(spec.n_classes * spec.n_domains *
                                    spec.samples_per_class_per_domain));
    RngStream root("synth_benchmark", spec.seed);
    const double base_cycles = 3.0;
    for (int64_t d = 0; d < spec.n_domains; ++d) {
        // per-domain style: frequency ladder, amplitude, phase offset, noise floor
        double freq_mult = 0.7 * std::pow(1.42, static_cast<double>(d));
        double amp_base = 0.8 + 0.22 * static_cast<double>(d);
        double phase_base = 0.55 * static_cast<double>(d);
        double noise = spec.noise_level * (1.0 + 0.25 * static_cast<double>(d % 3));
        for (int64_t c = 0; c < spec.n_classes; ++c) {
            for (int64_t i = 0; i < spec.samples_per_class_per_domain; ++i) {
                RngStream rng = root.sub("c" + std::to_string(c) + "_d" + std::to_string(d) +
                                         "_" + std::to_string(i));
                double freq = freq_mult * (1.0 + 0.08 * (2.0 * rng.uniform() - 1.0));
                double amp = amp_base * (1.0 + 0.10 * (2.0 * rng.uniform() - 1.0));
                double phase = phase_base + 0.15 * (2.0 * rng.uniform() - 1.0);
                TimeSeriesInstance inst;
                inst.k_channels = spec.k_channels;
                inst.length = spec.length;
                inst.class_label = c;
                inst.domain_tag = "d" + std::to_string(d);
                inst.origin_flag = 1;
                inst.instance_id = "c" + std::to_string(c) + "_d" + std::to_string(d) + "_" +
                                   std::to_string(i);
                inst.values.resize(static_cast<size_t>(spec.k_channels * spec.length));
                for (int64_t ch = 0; ch < spec.k_channels; ++ch) {
                    double ch_amp = amp * (1.0 - 0.12 * static_cast<double>(ch));
                    double ch_phase = phase + 0.7 * static_cast<double>(ch);
                    for (int64_t l = 0; l < spec.length; ++l) {
                        double tau = static_cast<double>(l) / static_cast<double>(spec.length);
                        double theta = 2.0 * M_PI * base_cycles * freq * tau + ch_phase;
                        inst.at(ch, l) = ch_amp * waveform(c, theta, tau) + noise * rng.normal();
                    }
                }
                out.push_back(std::move(inst));
            }
        }
    }
    return out;
}

DatasetSplit subsample_fraction(const DatasetSplit& split, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("subsample_fraction: fraction must be in (0,1]");
    if (fraction == 1.0) return split;
    DatasetSplit out = split;
    out.train.clear();
    std::vector<std::vector<size_t>> per_class(static_cast<size_t>(split.n_classes));
    for (size_t i = 0; i < split.train.size(); ++i)
        per_class[static_cast<size_t>(split.train[i].class_label)].push_back(i);
    RngStream rng("subsample", seed);
    std::vector<size_t> keep;
    for (int64_t c = 0; c < split.n_classes; ++c) {
        auto& bucket = per_class[static_cast<size_t>(c)];
        if (bucket.empty()) continue;
        int64_t n_keep = std::llround(fraction * static_cast<double>(bucket.size()));
        if (n_keep < 1)
            throw std::invalid_argument("subsample_fraction: fraction " +
                                        std::to_string(fraction) +
                                        " yields zero samples for class " + std::to_string(c));
        for (size_t i = bucket.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(bucket[i - 1], bucket[j]);
        }
        keep.insert(keep.end(), bucket.begin(), bucket.begin() + n_keep);
    }
    std::sort(keep.begin(), keep.end());
    for (size_t i : keep) out.train.push_back(split.train[i]);
    return out;
}

// ---------------------------------------------------------------------------
// storage
// ---------------------------------------------------------------------------

void save_instances(const std::string& data_path, const std::string& labels_path,
                    const std::vector<TimeSeriesInstance>& instances) {
    int64_t n = static_cast<int64_t>(instances.size());
    int64_t K = n > 0 ? instances.front().k_channels : 0;
    int64_t L = n > 0 ? instances.front().length : 0;
    NamedTensor values;
    values.name = "values";
    values.shape = {n, K, L};
    values.data.reserve(static_cast<size_t>(n * K * L));
    for (const auto& inst : instances) {
        if (inst.k_channels != K || inst.length != L)
            throw std::invalid_argument("save_instances: inhomogeneous instance shapes");
        values.data.insert(values.data.end(), inst.values.begin(), inst.values.end());
    }
    save_named_tensors(data_path, {values});

    std::ofstream csv(labels_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("save_instances: cannot write " + labels_path);
    csv << "instance_id,class,domain,origin\n";
    for (const auto& inst : instances)
        csv << inst.instance_id << "," << inst.class_label << "," << inst.domain_tag << ","
            << inst.origin_flag << "\n";
}

std::vector<TimeSeriesInstance> load_instances(const std::string& data_path,
                                               const std::string& labels_path) {
    auto tensors = load_named_tensors(data_path);
    if (tensors.size() != 1 || tensors[0].name != "values" || tensors[0].shape.size() != 3)
        throw std::runtime_error("load_instances: " + data_path +
                                 " is not an instance container");
    int64_t n = tensors[0].shape[0], K = tensors[0].shape[1], L = tensors[0].shape[2];

    std::ifstream csv(labels_path);
    if (!csv) throw std::runtime_error("load_instances: cannot open " + labels_path);
    std::string line;
    std::getline(csv, line);  // header
    std::vector<TimeSeriesInstance> out;
    out.reserve(static_cast<size_t>(n));
    int64_t row = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, cls, dom, origin;
        std::getline(ss, id, ',');
        std::getline(ss, cls, ',');
        std::getline(ss, dom, ',');
        std::getline(ss, origin, ',');
        TimeSeriesInstance inst;
        inst.instance_id = id;
        inst.class_label = std::stoll(cls);
        inst.domain_tag = dom;
        inst.origin_flag = origin.empty() ? 1 : std::stoi(origin);
        inst.k_channels = K;
        inst.length = L;
        inst.values.assign(tensors[0].data.begin() + row * K * L,
                           tensors[0].data.begin() + (row + 1) * K * L);
        out.push_back(std::move(inst));
        ++row;
    }
    if (row != n)
        throw std::runtime_error("load_instances: label rows (" + std::to_string(row) +
                                 ") do not match tensor count (" + std::to_string(n) + ")");
    return out;
}

void save_split(const std::string& dir, const std::string& name, const DatasetSplit& split,
                double window_overlap) {
    fs::create_directories(dir);
    json manifest;
    manifest["name"] = name;
    manifest["format_version"] = 1;
    manifest["C"] = split.n_classes;
    manifest["K"] = split.k_channels;
    manifest["L"] = split.length;
    manifest["window_overlap"] = window_overlap;
    json channels = json::array();
    for (int64_t c = 0; c < split.k_channels; ++c) channels.push_back("ch" + std::to_string(c));
    manifest["channels"] = channels;
    json domains = json::array();
    for (const auto& d : split.source_domains) domains.push_back(d);
    manifest["domains"] = domains;
    manifest["target_domain"] = split.target_domain;
    json files = json::array();
    auto emit = [&](const std::string& split_name, const std::vector<TimeSeriesInstance>& v) {
        std::string data = split_name + ".bin";
        std::string labels = split_name + ".csv";
        save_instances((fs::path(dir) / data).string(), (fs::path(dir) / labels).string(), v);
        files.push_back({{"split", split_name}, {"data", data}, {"labels", labels}});
    };
    emit("train", split.train);
    emit("val", split.val);
    emit("test", split.test);
    emit("target_test", split.target_test);
    if (split.stats) {
        NamedTensor mean{"mean", {split.k_channels}, split.stats->mean};
        NamedTensor stdev{"std", {split.k_channels}, split.stats->std};
        save_named_tensors((fs::path(dir) / "stats.bin").string(), {mean, stdev});
        files.push_back({{"split", "stats"}, {"data", "stats.bin"}, {"labels", ""}});
    }
    manifest["files"] = files;
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << manifest.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw std::runtime_error("read_manifest: cannot open " + manifest_path);
    json j;
    is >> j;
    if (j.contains("format_version") && j["format_version"].get<int>() != 1)
        throw std::runtime_error("read_manifest: unsupported manifest version in " +
                                 manifest_path);
    DatasetManifest m;
    m.name = j.value("name", "");
    m.n_classes = j.at("C").get<int64_t>();
    m.k_channels = j.at("K").get<int64_t>();
    m.length = j.at("L").get<int64_t>();
    m.window_overlap = j.value("window_overlap", 0.0);
    if (j.contains("channels"))
        for (const auto& c : j["channels"]) m.channels.push_back(c.get<std::string>());
    if (j.contains("domains"))
        for (const auto& d : j["domains"]) m.domains.push_back(d.get<std::string>());
    m.target_domain = j.value("target_domain", "");
    for (const auto& f : j.at("files"))
        m.files[f.at("split").get<std::string>()] = {f.at("data").get<std::string>(),
                                                     f.value("labels", "")};
    return m;
}

DatasetSplit load_split(const std::string& manifest_path) {
    DatasetManifest m = read_manifest(manifest_path);
    fs::path dir = fs::path(manifest_path).parent_path();
    DatasetSplit split;
    split.n_classes = m.n_classes;
    split.k_channels = m.k_channels;
    split.length = m.length;
    split.source_domains = m.domains;
    split.target_domain = m.target_domain;
    auto load_part = [&](const std::string& name) -> std::vector<TimeSeriesInstance> {
        auto it = m.files.find(name);
        if (it == m.files.end()) return {};
        return load_instances((dir / it->second.first).string(),
                              (dir / it->second.second).string());
    };
    split.train = load_part("train");
    split.val = load_part("val");
    split.test = load_part("test");
    split.target_test = load_part("target_test");
    auto it = m.files.find("stats");
    if (it != m.files.end()) {
        auto tensors = load_named_tensors((dir / it->second.first).string());
        NormStats st;
        for (auto& t : tensors) {
            if (t.name == "mean") st.mean = t.data;
            if (t.name == "std") st.std = t.data;
        }
        split.stats = st;
    }
    return split;
}

}  // namespace stylepad
