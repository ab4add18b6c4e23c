#include "varlab/augment.hpp"

#include "varlab/errors.hpp"

namespace varlab {

Tensor zero_pad(const Tensor& image, int pad) {
    if (image.rank() != 3) throw ShapeError("zero_pad: expected a single C x H x W example");
    if (pad == 0) return image;
    const int c = image.shape[0], h = image.shape[1], w = image.shape[2];
    Tensor out({c, h + 2 * pad, w + 2 * pad});
    const int ow = w + 2 * pad;
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h; ++y) {
            const float* src = image.data.data() + (static_cast<std::size_t>(ci) * h + y) * w;
            float* dst = out.data.data() +
                         (static_cast<std::size_t>(ci) * (h + 2 * pad) + y + pad) * ow + pad;
            std::copy(src, src + w, dst);
        }
    }
    return out;
}

Tensor crop(const Tensor& padded, int row_off, int col_off, int out_h, int out_w) {
    if (padded.rank() != 3) throw ShapeError("crop: expected a single C x H x W example");
    const int c = padded.shape[0], h = padded.shape[1], w = padded.shape[2];
    if (row_off < 0 || col_off < 0 || row_off + out_h > h || col_off + out_w > w) {
        throw ShapeError("crop: window out of bounds");
    }
    Tensor out({c, out_h, out_w});
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < out_h; ++y) {
            const float* src = padded.data.data() +
                               (static_cast<std::size_t>(ci) * h + y + row_off) * w + col_off;
            std::copy(src, src + out_w,
                      out.data.data() + (static_cast<std::size_t>(ci) * out_h + y) * out_w);
        }
    }
    return out;
}

Tensor flip_horizontal(const Tensor& image) {
    if (image.rank() != 3) throw ShapeError("flip: expected a single C x H x W example");
    const int c = image.shape[0], h = image.shape[1], w = image.shape[2];
    Tensor out(image.shape);
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h; ++y) {
            const float* src = image.data.data() + (static_cast<std::size_t>(ci) * h + y) * w;
            float* dst = out.data.data() + (static_cast<std::size_t>(ci) * h + y) * w;
            for (int x = 0; x < w; ++x) {
                dst[x] = src[w - 1 - x];
            }
        }
    }
    return out;
}

Tensor augment(const Tensor& image, const AugmentationSpec& spec, RngStream& stream) {
    if (image.rank() != 3) throw ShapeError("augment: expected a single C x H x W example");
    Tensor out = image;
    if (spec.random_crop) {
        const int h = image.shape[1], w = image.shape[2];
        const std::uint64_t span = 2 * static_cast<std::uint64_t>(spec.pad_pixels) + 1;
        const int row_off = static_cast<int>(bounded_uint(stream, span));
        const int col_off = static_cast<int>(bounded_uint(stream, span));
        if (spec.pad_pixels > 0) {
            out = crop(zero_pad(out, spec.pad_pixels), row_off, col_off, h, w);
        }
    }
    if (spec.horizontal_flip) {
        if (rng_next(stream) >> 63) {
            out = flip_horizontal(out);
        }
    }
    return out;
}

}  // namespace varlab
