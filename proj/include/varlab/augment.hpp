#pragma once

#include "varlab/rng.hpp"
#include "varlab/tensor.hpp"

namespace varlab {

/// Training-time augmentation switches. The stream contract is positional:
/// one augment() call consumes exactly (random_crop ? 2 : 0) +
/// (horizontal_flip ? 1 : 0) draws, independent of their values.
struct AugmentationSpec {
    int pad_pixels = 0;
    bool random_crop = false;
    bool horizontal_flip = false;

    bool any() const { return random_crop || horizontal_flip; }
};

/// Zero-pad a single C x H x W example by `pad` on each side.
Tensor zero_pad(const Tensor& image, int pad);

/// Crop an H x W window at (row_off, col_off) from a padded example.
Tensor crop(const Tensor& padded, int row_off, int col_off, int out_h, int out_w);

/// Mirror a single example along the width axis.
Tensor flip_horizontal(const Tensor& image);

/// Apply the spec to one example: pad, uniform crop over all
/// (2 pad + 1)^2 offsets (row draw then column draw), then flip with
/// probability 1/2 (top bit of one draw). Output shape equals input shape.
Tensor augment(const Tensor& image, const AugmentationSpec& spec, RngStream& stream);

}  // namespace varlab
