#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "varlab/tensor.hpp"

namespace varlab {

// IDX container format (MNIST distribution format): big-endian magic,
// big-endian dimension sizes, raw payload.

inline constexpr std::uint32_t kIdxMagicLabels = 0x00000801;
inline constexpr std::uint32_t kIdxMagicImages = 0x00000803;

/// Parse an IDX image file (magic 0x00000803) into an N x 1 x H x W tensor
/// of raw byte values (0..255, no normalization). Throws ParseError on bad
/// magic, truncated payload, or dimension/payload mismatch.
Tensor load_idx_images(std::span<const std::uint8_t> bytes);

/// Parse an IDX label file (magic 0x00000801) into class indices.
std::vector<int> load_idx_labels(std::span<const std::uint8_t> bytes);

}  // namespace varlab
