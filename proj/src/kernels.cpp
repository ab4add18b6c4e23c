#include "varlab/kernels.hpp"

namespace varlab::kernels {

namespace {

// Single definition of the sequential dot product both the parallel and the
// serial paths compile through. Keeping one expression form (plus
// -ffp-contract=off project-wide) is what makes the bitwise contract hold
// between translation units.
inline float dot_seq(const float* a, const float* b, int n) {
    float acc = 0.0f;
    for (int i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void check_matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1]) {
        throw ShapeError("matmul_nt: shapes " + shape_string(a.shape) + " x " +
                         shape_string(b.shape) + " do not conform");
    }
}

struct ConvGeom {
    int n, c, h, w, oc, kh, kw, oh, ow;
};

ConvGeom conv_geom(const Tensor& input, const Tensor& weight, int pad) {
    if (input.rank() != 4 || weight.rank() != 4) {
        throw ShapeError("conv2d: input and weight must be rank 4");
    }
    if (input.shape[1] != weight.shape[1]) {
        throw ShapeError("conv2d: channel mismatch, input " + shape_string(input.shape) +
                         " vs weight " + shape_string(weight.shape));
    }
    ConvGeom g;
    g.n = input.shape[0];
    g.c = input.shape[1];
    g.h = input.shape[2];
    g.w = input.shape[3];
    g.oc = weight.shape[0];
    g.kh = weight.shape[2];
    g.kw = weight.shape[3];
    g.oh = g.h + 2 * pad - g.kh + 1;
    g.ow = g.w + 2 * pad - g.kw + 1;
    if (g.oh < 1 || g.ow < 1) {
        throw ShapeError("conv2d: kernel larger than padded input");
    }
    return g;
}

inline float conv_out_element(const Tensor& input, const Tensor& weight, const ConvGeom& g,
                              int pad, int n, int oc, int oh, int ow) {
    float acc = 0.0f;
    for (int c = 0; c < g.c; ++c) {
        const float* in_plane = input.data.data() +
                                (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
        const float* w_plane = weight.data.data() +
                               (static_cast<std::size_t>(oc) * g.c + c) * g.kh * g.kw;
        for (int y = 0; y < g.kh; ++y) {
            const int iy = oh + y - pad;
            if (iy < 0 || iy >= g.h) continue;
            for (int x = 0; x < g.kw; ++x) {
                const int ix = ow + x - pad;
                if (ix < 0 || ix >= g.w) continue;
                acc += in_plane[iy * g.w + ix] * w_plane[y * g.kw + x];
            }
        }
    }
    return acc;
}

}  // namespace

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_matmul_nt(a, b);
    const int m = a.shape[0], n = b.shape[0], k = a.shape[1];
    Tensor c({m, n});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const float* arow = a.data.data() + static_cast<std::size_t>(i) * k;
        float* crow = c.data.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            crow[j] = dot_seq(arow, b.data.data() + static_cast<std::size_t>(j) * k, k);
        }
    }
    return c;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) {
        throw ShapeError("matmul: shapes " + shape_string(a.shape) + " x " +
                         shape_string(b.shape) + " do not conform");
    }
    return matmul_nt(a, transpose(b));
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: rank must be 2");
    const int m = a.shape[0], n = a.shape[1];
    Tensor t({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            t.data[static_cast<std::size_t>(j) * m + i] =
                a.data[static_cast<std::size_t>(i) * n + j];
        }
    }
    return t;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, int pad) {
    const ConvGeom g = conv_geom(input, weight, pad);
    if (bias.rank() != 1 || bias.shape[0] != g.oc) {
        throw ShapeError("conv2d: bias must have one entry per output channel");
    }
    Tensor out({g.n, g.oc, g.oh, g.ow});
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < g.n; ++n) {
        for (int oc = 0; oc < g.oc; ++oc) {
            float* out_plane = out.data.data() +
                               (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
            for (int oh = 0; oh < g.oh; ++oh) {
                for (int ow = 0; ow < g.ow; ++ow) {
                    out_plane[oh * g.ow + ow] =
                        conv_out_element(input, weight, g, pad, n, oc, oh, ow) +
                        bias.data[oc];
                }
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                            int pad) {
    const ConvGeom g = conv_geom(input, weight, pad);
    require_shape(grad_out, {g.n, g.oc, g.oh, g.ow}, "conv2d_backward grad_out");
    Conv2dGrads grads;
    grads.input = Tensor({g.n, g.c, g.h, g.w});
    grads.weight = Tensor({g.oc, g.c, g.kh, g.kw});
    grads.bias = Tensor({g.oc});

    // grad_weight[oc,c,y,x]: reduce over (n, oh, ow) in order.
#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < g.oc; ++oc) {
        for (int c = 0; c < g.c; ++c) {
            for (int y = 0; y < g.kh; ++y) {
                for (int x = 0; x < g.kw; ++x) {
                    float acc = 0.0f;
                    for (int n = 0; n < g.n; ++n) {
                        const float* go_plane =
                            grad_out.data.data() +
                            (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
                        const float* in_plane =
                            input.data.data() +
                            (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
                        for (int oh = 0; oh < g.oh; ++oh) {
                            const int iy = oh + y - pad;
                            if (iy < 0 || iy >= g.h) continue;
                            for (int ow = 0; ow < g.ow; ++ow) {
                                const int ix = ow + x - pad;
                                if (ix < 0 || ix >= g.w) continue;
                                acc += go_plane[oh * g.ow + ow] * in_plane[iy * g.w + ix];
                            }
                        }
                    }
                    grads.weight.data[((static_cast<std::size_t>(oc) * g.c + c) * g.kh + y) *
                                          g.kw +
                                      x] = acc;
                }
            }
        }
    }

    // grad_input[n,c,iy,ix]: reduce over (oc, y, x) in order.
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.c; ++c) {
            float* gi_plane = grads.input.data.data() +
                              (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
            for (int iy = 0; iy < g.h; ++iy) {
                for (int ix = 0; ix < g.w; ++ix) {
                    float acc = 0.0f;
                    for (int oc = 0; oc < g.oc; ++oc) {
                        const float* go_plane =
                            grad_out.data.data() +
                            (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
                        const float* w_plane =
                            weight.data.data() +
                            (static_cast<std::size_t>(oc) * g.c + c) * g.kh * g.kw;
                        for (int y = 0; y < g.kh; ++y) {
                            const int oh = iy - y + pad;
                            if (oh < 0 || oh >= g.oh) continue;
                            for (int x = 0; x < g.kw; ++x) {
                                const int ow = ix - x + pad;
                                if (ow < 0 || ow >= g.ow) continue;
                                acc += go_plane[oh * g.ow + ow] * w_plane[y * g.kw + x];
                            }
                        }
                    }
                    gi_plane[iy * g.w + ix] = acc;
                }
            }
        }
    }

    // grad_bias[oc]: reduce over (n, oh, ow) in order.
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < g.oc; ++oc) {
        float acc = 0.0f;
        for (int n = 0; n < g.n; ++n) {
            const float* go_plane = grad_out.data.data() +
                                    (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
            for (int i = 0; i < g.oh * g.ow; ++i) {
                acc += go_plane[i];
            }
        }
        grads.bias.data[oc] = acc;
    }
    return grads;
}

PoolResult maxpool2x2_forward(const Tensor& input) {
    if (input.rank() != 4 || input.shape[2] % 2 != 0 || input.shape[3] % 2 != 0) {
        throw ShapeError("maxpool2x2: input must be rank 4 with even H and W");
    }
    const int n = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
    const int oh = h / 2, ow = w / 2;
    PoolResult r;
    r.output = Tensor({n, c, oh, ow});
    r.argmax.assign(r.output.size(), 0);
#pragma omp parallel for collapse(2) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const std::size_t in_base = (static_cast<std::size_t>(ni) * c + ci) * h * w;
            const std::size_t out_base = (static_cast<std::size_t>(ni) * c + ci) * oh * ow;
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    int best_idx = static_cast<int>(in_base) + (2 * y) * w + 2 * x;
                    float best = input.data[best_idx];
                    for (int ky = 0; ky < 2; ++ky) {
                        for (int kx = 0; kx < 2; ++kx) {
                            const int idx = static_cast<int>(in_base) + (2 * y + ky) * w +
                                            (2 * x + kx);
                            if (input.data[idx] > best) {
                                best = input.data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    r.output.data[out_base + static_cast<std::size_t>(y) * ow + x] = best;
                    r.argmax[out_base + static_cast<std::size_t>(y) * ow + x] = best_idx;
                }
            }
        }
    }
    return r;
}

Tensor maxpool2x2_backward(const PoolResult& pooled, const Tensor& grad_out,
                           const std::vector<int>& input_shape) {
    if (grad_out.shape != pooled.output.shape) {
        throw ShapeError("maxpool2x2_backward: grad shape mismatch");
    }
    Tensor grad_in(input_shape);
    // Pool windows are disjoint, so scatter order cannot collide.
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        grad_in.data[static_cast<std::size_t>(pooled.argmax[i])] += grad_out.data[i];
    }
    return grad_in;
}

namespace ref {

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_matmul_nt(a, b);
    const int m = a.shape[0], n = b.shape[0], k = a.shape[1];
    Tensor c({m, n});
    for (int i = 0; i < m; ++i) {
        const float* arow = a.data.data() + static_cast<std::size_t>(i) * k;
        float* crow = c.data.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            crow[j] = dot_seq(arow, b.data.data() + static_cast<std::size_t>(j) * k, k);
        }
    }
    return c;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, int pad) {
    const ConvGeom g = conv_geom(input, weight, pad);
    if (bias.rank() != 1 || bias.shape[0] != g.oc) {
        throw ShapeError("conv2d: bias must have one entry per output channel");
    }
    Tensor out({g.n, g.oc, g.oh, g.ow});
    for (int n = 0; n < g.n; ++n) {
        for (int oc = 0; oc < g.oc; ++oc) {
            float* out_plane = out.data.data() +
                               (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
            for (int oh = 0; oh < g.oh; ++oh) {
                for (int ow = 0; ow < g.ow; ++ow) {
                    out_plane[oh * g.ow + ow] =
                        conv_out_element(input, weight, g, pad, n, oc, oh, ow) +
                        bias.data[oc];
                }
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                            int pad) {
    // Shares the parallel implementation's arithmetic by construction:
    // identical loops minus the pragmas.
    const ConvGeom g = conv_geom(input, weight, pad);
    require_shape(grad_out, {g.n, g.oc, g.oh, g.ow}, "conv2d_backward grad_out");
    Conv2dGrads grads;
    grads.input = Tensor({g.n, g.c, g.h, g.w});
    grads.weight = Tensor({g.oc, g.c, g.kh, g.kw});
    grads.bias = Tensor({g.oc});
    for (int oc = 0; oc < g.oc; ++oc) {
        for (int c = 0; c < g.c; ++c) {
            for (int y = 0; y < g.kh; ++y) {
                for (int x = 0; x < g.kw; ++x) {
                    float acc = 0.0f;
                    for (int n = 0; n < g.n; ++n) {
                        const float* go_plane =
                            grad_out.data.data() +
                            (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
                        const float* in_plane =
                            input.data.data() +
                            (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
                        for (int oh = 0; oh < g.oh; ++oh) {
                            const int iy = oh + y - pad;
                            if (iy < 0 || iy >= g.h) continue;
                            for (int ow = 0; ow < g.ow; ++ow) {
                                const int ix = ow + x - pad;
                                if (ix < 0 || ix >= g.w) continue;
                                acc += go_plane[oh * g.ow + ow] * in_plane[iy * g.w + ix];
                            }
                        }
                    }
                    grads.weight.data[((static_cast<std::size_t>(oc) * g.c + c) * g.kh + y) *
                                          g.kw +
                                      x] = acc;
                }
            }
        }
    }
    for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.c; ++c) {
            float* gi_plane = grads.input.data.data() +
                              (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
            for (int iy = 0; iy < g.h; ++iy) {
                for (int ix = 0; ix < g.w; ++ix) {
                    float acc = 0.0f;
                    for (int oc = 0; oc < g.oc; ++oc) {
                        const float* go_plane =
                            grad_out.data.data() +
                            (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
                        const float* w_plane =
                            weight.data.data() +
                            (static_cast<std::size_t>(oc) * g.c + c) * g.kh * g.kw;
                        for (int y = 0; y < g.kh; ++y) {
                            const int oh = iy - y + pad;
                            if (oh < 0 || oh >= g.oh) continue;
                            for (int x = 0; x < g.kw; ++x) {
                                const int ow = ix - x + pad;
                                if (ow < 0 || ow >= g.ow) continue;
                                acc += go_plane[oh * g.ow + ow] * w_plane[y * g.kw + x];
                            }
                        }
                    }
                    gi_plane[iy * g.w + ix] = acc;
                }
            }
        }
    }
    for (int oc = 0; oc < g.oc; ++oc) {
        float acc = 0.0f;
        for (int n = 0; n < g.n; ++n) {
            const float* go_plane = grad_out.data.data() +
                                    (static_cast<std::size_t>(n) * g.oc + oc) * g.oh * g.ow;
            for (int i = 0; i < g.oh * g.ow; ++i) {
                acc += go_plane[i];
            }
        }
        grads.bias.data[oc] = acc;
    }
    return grads;
}

}  // namespace ref

}  // namespace varlab::kernels
