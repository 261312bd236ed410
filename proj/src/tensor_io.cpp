#include "semcom/tensor_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace semcom::io {

namespace {
template <typename T>
void write_raw(const std::string& path, const std::vector<T>& v) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

template <typename T>
std::vector<T> read_raw(const std::string& path, size_t expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    std::vector<T> v(expected);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(expected * sizeof(T)));
    if (static_cast<size_t>(f.gcount()) != expected * sizeof(T))
        throw std::runtime_error("short read: " + path);
    return v;
}
}  // namespace

void write_f64(const std::string& path, const std::vector<double>& v) { write_raw(path, v); }
std::vector<double> read_f64(const std::string& path, size_t expected) {
    return read_raw<double>(path, expected);
}
void write_i32(const std::string& path, const std::vector<int32_t>& v) { write_raw(path, v); }
std::vector<int32_t> read_i32(const std::string& path, size_t expected) {
    return read_raw<int32_t>(path, expected);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace semcom::io
