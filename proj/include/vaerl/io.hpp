#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vaerl::io {

// Writes to `<path>.tmp` then renames over `path`. Parent directories are created.
void write_file_atomic(const std::string& path, std::string_view contents);

std::string read_file(const std::string& path);

bool exists(const std::string& path);

// 16 hex digits of FNV-1a 64 over `text`.
std::string fnv1a_hex(std::string_view text);

}  // namespace vaerl::io
