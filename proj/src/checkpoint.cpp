#include "parrot/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace parrot::nd {

namespace {

constexpr char kMagic[5] = {'N', 'D', 'I', 'F', '1'};

// This codebase targets little-endian hosts; doubles and integers are
// written as raw host bytes.
template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error(std::string("checkpoint: truncated file reading ") + what);
    return v;
}

} // namespace

void save_params(const std::string& path, std::span<const Param* const> params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint64_t>(os, params.size());
    for (const Param* p : params) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        const auto& shape = p->value.shape();
        write_pod<uint32_t>(os, static_cast<uint32_t>(shape.size()));
        for (long d : shape) write_pod<uint64_t>(os, static_cast<uint64_t>(d));
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

void load_params(const std::string& path, std::span<Param* const> params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[5];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint64_t count = read_pod<uint64_t>(is, "param count");

    std::map<std::string, Tensor> loaded;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = read_pod<uint32_t>(is, "name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated name in " + path);
        uint32_t rank = read_pod<uint32_t>(is, "rank");
        std::vector<long> shape(rank);
        for (uint32_t r = 0; r < rank; ++r)
            shape[r] = static_cast<long>(read_pod<uint64_t>(is, "dim"));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(double) * t.size()));
        if (!is) throw std::runtime_error("checkpoint: truncated data for '" + name + "'");
        if (!loaded.emplace(name, std::move(t)).second)
            throw std::runtime_error("checkpoint: duplicate parameter '" + name + "'");
    }

    if (loaded.size() != params.size())
        throw std::runtime_error("checkpoint: " + path + " has " + std::to_string(loaded.size()) +
                                 " parameters, expected " + std::to_string(params.size()));
    for (Param* p : params) {
        auto it = loaded.find(p->name);
        if (it == loaded.end())
            throw std::runtime_error("checkpoint: missing parameter '" + p->name + "'");
        if (it->second.shape() != p->value.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + p->name + "': file " +
                                     it->second.shape_str() + " vs model " +
                                     p->value.shape_str());
        p->value = std::move(it->second);
    }
}

} // namespace parrot::nd
