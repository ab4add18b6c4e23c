#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace varlab {

/// Inflate a gzip-encoded buffer.
std::vector<unsigned char> gunzip(const std::vector<unsigned char>& compressed);

/// Download url to dest: HTTP GET, gunzip when the url ends in .gz, verify
/// the SHA-256 of the decoded payload, write atomically. Idempotent: if
/// dest already exists with a matching digest, no network access happens.
/// On checksum mismatch the partial file is removed and ChecksumError is
/// thrown. Concurrent calls for the same dest serialize on a lock file.
std::filesystem::path fetch_dataset(const std::string& url, const std::string& expected_sha256,
                                    const std::filesystem::path& dest);

}  // namespace varlab
