#include "stylepad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stylepad {

namespace {

constexpr char kMagic[4] = {'D', 'I', '2', 'S'};

template <typename T>
void write_pod(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_named_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_pod<uint32_t>(os, kCheckpointVersion);
    write_pod<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_pod<uint8_t>(os, 0);  // float64
        write_pod<uint32_t>(os, static_cast<uint32_t>(t.shape.size()));
        for (int64_t e : t.shape) write_pod<uint64_t>(os, static_cast<uint64_t>(e));
        if (shape_numel(t.shape) != static_cast<int64_t>(t.data.size()))
            throw std::invalid_argument("checkpoint: tensor \"" + t.name +
                                        "\" data size does not match shape");
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<NamedTensor> load_named_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version = read_pod<uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version) + " in " + path);
    uint32_t count = read_pod<uint32_t>(is);
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        uint32_t name_len = read_pod<uint32_t>(is);
        t.name.resize(name_len);
        is.read(t.name.data(), name_len);
        uint8_t dtype = read_pod<uint8_t>(is);
        if (dtype != 0)
            throw std::runtime_error("checkpoint: unknown dtype tag " + std::to_string(dtype));
        uint32_t rank = read_pod<uint32_t>(is);
        t.shape.resize(rank);
        for (uint32_t r = 0; r < rank; ++r)
            t.shape[r] = static_cast<int64_t>(read_pod<uint64_t>(is));
        t.data.resize(static_cast<size_t>(shape_numel(t.shape)));
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor \"" + t.name + "\"");
        out.push_back(std::move(t));
    }
    return out;
}

void save_checkpoint(const std::string& path, const ParameterSet& params) {
    std::vector<NamedTensor> tensors;
    tensors.reserve(params.size());
    for (const auto& [name, t] : params.items())
        tensors.push_back({name, t.shape(), t.data()});
    save_named_tensors(path, tensors);
}

void load_checkpoint(const std::string& path, ParameterSet& params) {
    auto tensors = load_named_tensors(path);
    if (tensors.size() != params.size())
        throw std::runtime_error("checkpoint: " + path + " holds " +
                                 std::to_string(tensors.size()) + " tensors, model expects " +
                                 std::to_string(params.size()));
    for (auto& t : tensors) {
        Tensor& p = params.at(t.name);
        if (p.shape() != t.shape)
            throw std::runtime_error("checkpoint: shape mismatch for \"" + t.name + "\": file " +
                                     shape_str(t.shape) + " vs model " + shape_str(p.shape()));
        p.data() = std::move(t.data);
    }
}

}  // namespace stylepad
