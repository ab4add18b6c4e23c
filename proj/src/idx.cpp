#include "varlab/idx.hpp"

#include <string>

#include "varlab/errors.hpp"

namespace varlab {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t off) {
    if (off + 4 > bytes.size()) {
        throw ParseError("idx: truncated header");
    }
    return (static_cast<std::uint32_t>(bytes[off]) << 24) |
           (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[off + 3]);
}

void check_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != expected) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "0x%08X", magic);
        throw ParseError(std::string("idx: bad magic ") + buf);
    }
}

}  // namespace

Tensor load_idx_images(std::span<const std::uint8_t> bytes) {
    check_magic(bytes, kIdxMagicImages);
    const std::uint32_t n = read_be32(bytes, 4);
    const std::uint32_t h = read_be32(bytes, 8);
    const std::uint32_t w = read_be32(bytes, 12);
    const std::size_t expected = static_cast<std::size_t>(n) * h * w;
    const std::size_t payload = bytes.size() - 16;
    if (payload < expected) {
        throw ParseError("idx: truncated payload, header claims " + std::to_string(expected) +
                         " bytes, found " + std::to_string(payload));
    }
    if (payload > expected) {
        throw ParseError("idx: payload exceeds declared dimensions");
    }
    Tensor t({static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t i = 0; i < expected; ++i) {
        t.data[i] = static_cast<float>(bytes[16 + i]);
    }
    return t;
}

std::vector<int> load_idx_labels(std::span<const std::uint8_t> bytes) {
    check_magic(bytes, kIdxMagicLabels);
    const std::uint32_t n = read_be32(bytes, 4);
    const std::size_t payload = bytes.size() - 8;
    if (payload < n) {
        throw ParseError("idx: truncated payload, header claims " + std::to_string(n) +
                         " labels, found " + std::to_string(payload));
    }
    if (payload > n) {
        throw ParseError("idx: payload exceeds declared count");
    }
    std::vector<int> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(bytes[8 + i]);
    }
    return labels;
}

}  // namespace varlab
