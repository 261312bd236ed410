#include <cstring>
#include <fstream>
#include <iostream>

#include "semcom/experiments.hpp"

namespace semcom::exp {

namespace {
constexpr char kMagic[8] = {'S', 'E', 'M', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void put_string(std::ofstream& f, const std::string& s) {
    put<uint32_t>(f, static_cast<uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::ifstream& f) {
    const uint32_t n = take<uint32_t>(f);
    if (n > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    f.read(s.data(), n);
    if (!f) throw std::runtime_error("checkpoint: truncated string");
    return s;
}
}  // namespace

void Checkpoint::save(const std::string& path, const nn::ParameterSet& ps, uint64_t config_hash,
                      const std::string& phase) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    put<uint32_t>(f, kVersion);
    put<uint64_t>(f, config_hash);
    put_string(f, phase);
    put<uint64_t>(f, ps.entries().size());
    for (const auto& [name, var] : ps.entries()) {
        put_string(f, name);
        put<uint8_t>(f, 0);  // dtype: f64
        put<uint32_t>(f, static_cast<uint32_t>(var->val.rows));
        put<uint32_t>(f, static_cast<uint32_t>(var->val.cols));
        f.write(reinterpret_cast<const char*>(var->val.data.data()),
                static_cast<std::streamsize>(var->val.data.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint::Loaded Checkpoint::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    Loaded out;
    out.version = take<uint32_t>(f);
    if (out.version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version in " + path);
    out.config_hash = take<uint64_t>(f);
    out.phase = take_string(f);
    const uint64_t count = take<uint64_t>(f);
    for (uint64_t i = 0; i < count; ++i) {
        const std::string name = take_string(f);
        const uint8_t dtype = take<uint8_t>(f);
        if (dtype != 0) throw std::runtime_error("checkpoint: unknown dtype");
        const uint32_t rows = take<uint32_t>(f);
        const uint32_t cols = take<uint32_t>(f);
        Mat m(static_cast<int>(rows), static_cast<int>(cols));
        f.read(reinterpret_cast<char*>(m.data.data()),
               static_cast<std::streamsize>(m.data.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated tensor " + name);
        out.tensors.emplace_back(name, std::move(m));
    }
    return out;
}

void Checkpoint::restore(const Loaded& ckpt, nn::ParameterSet& ps, uint64_t expected_hash) {
    if (ckpt.config_hash != expected_hash)
        std::cerr << "warning: checkpoint config hash " << std::hex << ckpt.config_hash
                  << " differs from current config " << expected_hash << std::dec << "\n";
    if (ckpt.tensors.size() != ps.entries().size())
        throw std::runtime_error("checkpoint: tensor count mismatch");
    for (const auto& [name, mat] : ckpt.tensors) {
        nn::Var v = ps.get(name);
        if (!v->val.same_shape(mat))
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        v->val = mat;
    }
}

}  // namespace semcom::exp
