#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semcom::io {

// Raw row-major little-endian tensor files. The manifest (JSON) carries the
// shapes; these files carry the bytes only.
void write_f64(const std::string& path, const std::vector<double>& v);
std::vector<double> read_f64(const std::string& path, size_t expected);
void write_i32(const std::string& path, const std::vector<int32_t>& v);
std::vector<int32_t> read_i32(const std::string& path, size_t expected);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace semcom::io
