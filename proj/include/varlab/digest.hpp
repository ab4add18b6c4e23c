#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace varlab {

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(const std::vector<float>& v);

/// SHA-256 of a file's contents. Throws IoError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace varlab
