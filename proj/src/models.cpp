#include "varlab/models.hpp"

#include <algorithm>
#include <cmath>

#include "varlab/errors.hpp"
#include "varlab/kernels.hpp"

namespace varlab {

namespace {

using kernels::conv2d_backward;
using kernels::conv2d_forward;
using kernels::matmul_nt;
using kernels::maxpool2x2_backward;
using kernels::maxpool2x2_forward;
using kernels::PoolResult;
using kernels::transpose;

Tensor flatten_rows(const Tensor& batch) {
    const int n = batch.shape[0];
    const int features = static_cast<int>(batch.size()) / std::max(n, 1);
    Tensor out({n, features}, batch.data);
    return out;
}

void add_bias_rows(Tensor& t, const Tensor& bias) {
    const int n = t.shape[0], f = t.shape[1];
    for (int i = 0; i < n; ++i) {
        float* row = t.data.data() + static_cast<std::size_t>(i) * f;
        for (int j = 0; j < f; ++j) {
            row[j] += bias.data[j];
        }
    }
}

Tensor relu(const Tensor& t) {
    Tensor out = t;
    for (float& v : out.data) {
        v = v > 0.0f ? v : 0.0f;
    }
    return out;
}

// d/dz relu at exactly 0 is taken as 0.
Tensor relu_backward(const Tensor& pre, const Tensor& grad) {
    Tensor out = grad;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (pre.data[i] <= 0.0f) out.data[i] = 0.0f;
    }
    return out;
}

void apply_noise(Tensor& t, NoiseHook* hook) {
    if (!hook) return;
    apply_lowlevel_noise(t, hook->stream, hook->rel);
}

// Mask values are 0 or 1/keep, one uniform draw per element in row-major
// order. Draws happen in train mode with rate > 0 only.
Tensor dropout_mask(const std::vector<int>& shape, float rate, RngStream& stream) {
    Tensor mask(shape);
    const float inv_keep = 1.0f / (1.0f - rate);
    const double keep = 1.0 - static_cast<double>(rate);
    for (float& v : mask.data) {
        v = uniform01(stream) < keep ? inv_keep : 0.0f;
    }
    return mask;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] *= b.data[i];
    }
    return out;
}

Tensor column_sums(const Tensor& t) {
    const int n = t.shape[0], f = t.shape[1];
    Tensor out({f});
    for (int j = 0; j < f; ++j) {
        float acc = 0.0f;
        for (int i = 0; i < n; ++i) {
            acc += t.data[static_cast<std::size_t>(i) * f + j];
        }
        out.data[j] = acc;
    }
    return out;
}

// Softmax cross-entropy head: loss in double, dlogits = (p - onehot)/B in
// float. Row softmax uses max subtraction; probabilities clamp at 1e-12.
double softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
    const int n = logits.shape[0], c = logits.shape[1];
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("loss: label count does not match batch size");
    }
    double loss = 0.0;
    if (dlogits) *dlogits = Tensor({n, c});
    std::vector<double> p(c);
    for (int i = 0; i < n; ++i) {
        const float* row = logits.data.data() + static_cast<std::size_t>(i) * c;
        double m = row[0];
        for (int j = 1; j < c; ++j) m = std::max(m, static_cast<double>(row[j]));
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            p[j] = std::exp(static_cast<double>(row[j]) - m);
            sum += p[j];
        }
        for (int j = 0; j < c; ++j) p[j] /= sum;
        loss += -std::log(std::max(p[labels[i]], 1e-12));
        if (dlogits) {
            float* drow = dlogits->data.data() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) {
                const double y = (j == labels[i]) ? 1.0 : 0.0;
                drow[j] = static_cast<float>((p[j] - y) / n);
            }
        }
    }
    return loss / n;
}

// Fully-connected layer: weight [out x in], forward y = x W^T + b.
Tensor fc_forward(const Tensor& x, const Tensor& w, const Tensor& b, NoiseHook* noise) {
    Tensor y = matmul_nt(x, w);
    add_bias_rows(y, b);
    apply_noise(y, noise);
    return y;
}

struct FcGrads {
    Tensor input;   // needed for all but the first layer
    Tensor weight;
    Tensor bias;
};

FcGrads fc_backward(const Tensor& x, const Tensor& w, const Tensor& dy, NoiseHook* noise,
                    bool want_input) {
    FcGrads g;
    if (want_input) {
        g.input = matmul_nt(dy, transpose(w));
        apply_noise(g.input, noise);
    }
    g.weight = matmul_nt(transpose(dy), transpose(x));
    apply_noise(g.weight, noise);
    g.bias = column_sums(dy);
    return g;
}

// Full set of intermediates for one pass; backward() replays forward
// through this so both entry points consume identical draws.
struct FwdCache {
    Tensor x_flat;
    // mlp / fc head
    Tensor z1, a1, mask, a1_dropped;
    // conv paths
    Tensor conv1_in, conv1_z, conv1_a;
    PoolResult pool1;
    Tensor conv2_z, conv2_a;
    PoolResult pool2;
    Tensor flat_features;
    Tensor fc_z, fc_a, fc_mask, fc_dropped;
    Tensor logits;
};

bool use_dropout(const ModelSpec& spec, Mode mode) {
    return mode == Mode::Train && spec.dropout_rate > 0.0f;
}

FwdCache run_forward(const ModelSpec& spec, const Params& params, const Tensor& batch,
                     Mode mode, RngStream& dropout_stream, NoiseHook* noise) {
    const auto [c, h, w] = spec.input_shape;
    if (batch.rank() != 4 || batch.shape[1] != c || batch.shape[2] != h || batch.shape[3] != w) {
        throw ShapeError("forward: batch shape " + shape_string(batch.shape) +
                         " does not match model input " +
                         shape_string({batch.shape.empty() ? 0 : batch.shape[0], c, h, w}));
    }
    FwdCache f;
    switch (spec.arch) {
        case Arch::LinearSoftmax: {
            f.x_flat = flatten_rows(batch);
            f.logits = fc_forward(f.x_flat, params.find("fc.w"), params.find("fc.b"), noise);
            break;
        }
        case Arch::MlpOneHidden: {
            f.x_flat = flatten_rows(batch);
            f.z1 = fc_forward(f.x_flat, params.find("fc1.w"), params.find("fc1.b"), noise);
            f.a1 = relu(f.z1);
            if (use_dropout(spec, mode)) {
                f.mask = dropout_mask(f.a1.shape, spec.dropout_rate, dropout_stream);
                f.a1_dropped = hadamard(f.a1, f.mask);
            } else {
                f.a1_dropped = f.a1;
            }
            f.logits = fc_forward(f.a1_dropped, params.find("fc2.w"), params.find("fc2.b"),
                                  noise);
            break;
        }
        case Arch::ConvOneHidden: {
            const int pad = (spec.kernel_size - 1) / 2;
            f.conv1_in = batch;
            f.conv1_z = conv2d_forward(batch, params.find("conv.w"), params.find("conv.b"), pad);
            apply_noise(f.conv1_z, noise);
            f.conv1_a = relu(f.conv1_z);
            f.flat_features = flatten_rows(f.conv1_a);
            if (use_dropout(spec, mode)) {
                f.mask = dropout_mask(f.flat_features.shape, spec.dropout_rate, dropout_stream);
                f.a1_dropped = hadamard(f.flat_features, f.mask);
            } else {
                f.a1_dropped = f.flat_features;
            }
            f.logits = fc_forward(f.a1_dropped, params.find("fc.w"), params.find("fc.b"), noise);
            break;
        }
        case Arch::TinyConvNet: {
            f.conv1_in = batch;
            f.conv1_z = conv2d_forward(batch, params.find("conv1.w"), params.find("conv1.b"), 1);
            apply_noise(f.conv1_z, noise);
            f.conv1_a = relu(f.conv1_z);
            f.pool1 = maxpool2x2_forward(f.conv1_a);
            f.conv2_z =
                conv2d_forward(f.pool1.output, params.find("conv2.w"), params.find("conv2.b"), 1);
            apply_noise(f.conv2_z, noise);
            f.conv2_a = relu(f.conv2_z);
            f.pool2 = maxpool2x2_forward(f.conv2_a);
            f.flat_features = flatten_rows(f.pool2.output);
            f.fc_z = fc_forward(f.flat_features, params.find("fc1.w"), params.find("fc1.b"),
                                noise);
            f.fc_a = relu(f.fc_z);
            if (use_dropout(spec, mode)) {
                f.fc_mask = dropout_mask(f.fc_a.shape, spec.dropout_rate, dropout_stream);
                f.fc_dropped = hadamard(f.fc_a, f.fc_mask);
            } else {
                f.fc_dropped = f.fc_a;
            }
            f.logits = fc_forward(f.fc_dropped, params.find("fc2.w"), params.find("fc2.b"),
                                  noise);
            break;
        }
    }
    return f;
}

void capture_into(ActivationCapture& cap, const std::string& name, const Tensor& rows) {
    cap[name] = flatten_rows(rows);
}

}  // namespace

void apply_lowlevel_noise(Tensor& t, RngStream& stream, float rel) {
    for (float& v : t.data) {
        const float g = gaussian(stream);
        v = v * (1.0f + rel * g);
    }
}

void ModelSpec::validate() const {
    if (class_count < 2) throw ValidationError("model: class_count must be >= 2");
    if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) {
        throw ValidationError("model: dropout_rate must lie in [0, 1)");
    }
    if (!(width_multiplier > 0.0f)) throw ValidationError("model: width_multiplier must be > 0");
    for (int d : input_shape) {
        if (d < 1) throw ValidationError("model: input dimensions must be >= 1");
    }
    if (arch == Arch::ConvOneHidden || arch == Arch::TinyConvNet) {
        const int k = (arch == Arch::ConvOneHidden) ? kernel_size : 3;
        if (k % 2 != 1 || k < 1) throw ValidationError("model: kernel size must be odd");
    }
    if (arch == Arch::TinyConvNet) {
        if (input_shape[1] % 4 != 0 || input_shape[2] % 4 != 0) {
            throw ValidationError("model: TinyConvNet needs H and W divisible by 4");
        }
    }
}

int ModelSpec::scaled(int base) const {
    const long scaled = std::lround(static_cast<double>(width_multiplier) * base);
    return static_cast<int>(std::max(1L, scaled));
}

Tensor& Params::find(const std::string& name) {
    for (auto& nt : tensors) {
        if (nt.name == name) return nt.tensor;
    }
    throw ValidationError("params: no tensor named " + name);
}

const Tensor& Params::find(const std::string& name) const {
    for (const auto& nt : tensors) {
        if (nt.name == name) return nt.tensor;
    }
    throw ValidationError("params: no tensor named " + name);
}

std::size_t Params::total_elements() const {
    std::size_t n = 0;
    for (const auto& nt : tensors) n += nt.tensor.size();
    return n;
}

std::vector<std::pair<std::string, std::vector<int>>> param_layout(const ModelSpec& spec) {
    spec.validate();
    const int d = spec.input_pixels();
    const int classes = spec.class_count;
    const auto [c, h, w] = spec.input_shape;
    switch (spec.arch) {
        case Arch::LinearSoftmax:
            return {{"fc.w", {classes, d}}, {"fc.b", {classes}}};
        case Arch::MlpOneHidden: {
            const int hidden = spec.scaled(spec.hidden_units);
            return {{"fc1.w", {hidden, d}},
                    {"fc1.b", {hidden}},
                    {"fc2.w", {classes, hidden}},
                    {"fc2.b", {classes}}};
        }
        case Arch::ConvOneHidden: {
            const int ch = spec.scaled(spec.channels);
            const int k = spec.kernel_size;
            return {{"conv.w", {ch, c, k, k}},
                    {"conv.b", {ch}},
                    {"fc.w", {classes, ch * h * w}},
                    {"fc.b", {classes}}};
        }
        case Arch::TinyConvNet: {
            const int c1 = spec.scaled(spec.channels1);
            const int c2 = spec.scaled(spec.channels2);
            const int fc = spec.scaled(spec.fc_units);
            const int flat = c2 * (h / 4) * (w / 4);
            return {{"conv1.w", {c1, c, 3, 3}}, {"conv1.b", {c1}},
                    {"conv2.w", {c2, c1, 3, 3}}, {"conv2.b", {c2}},
                    {"fc1.w", {fc, flat}},       {"fc1.b", {fc}},
                    {"fc2.w", {classes, fc}},    {"fc2.b", {classes}}};
        }
    }
    throw ValidationError("model: unknown architecture");
}

Params init_params(const ModelSpec& spec, RngStream stream) {
    Params params;
    for (const auto& [name, shape] : param_layout(spec)) {
        Tensor t(shape);
        const bool is_weight = name.size() > 2 && name.substr(name.size() - 2) == ".w";
        if (is_weight) {
            // fan_in: fc weights are [out x in]; conv weights [oc x c x kh x kw].
            std::size_t fan_in = 1;
            for (std::size_t i = 1; i < shape.size(); ++i) {
                fan_in *= static_cast<std::size_t>(shape[i]);
            }
            const float scale = std::sqrt(2.0f / static_cast<float>(fan_in));
            for (float& v : t.data) {
                v = scale * gaussian(stream);
            }
        }
        params.tensors.push_back({name, std::move(t)});
    }
    return params;
}

ForwardResult forward(const ModelSpec& spec, const Params& params, const Tensor& batch,
                      Mode mode, RngStream& dropout_stream, NoiseHook* noise,
                      bool capture_activations) {
    FwdCache f = run_forward(spec, params, batch, mode, dropout_stream, noise);
    ForwardResult result;
    if (capture_activations) {
        switch (spec.arch) {
            case Arch::LinearSoftmax:
                break;
            case Arch::MlpOneHidden:
                capture_into(result.activations, "hidden_relu", f.a1);
                break;
            case Arch::ConvOneHidden:
                capture_into(result.activations, "conv_relu", f.conv1_a);
                break;
            case Arch::TinyConvNet:
                capture_into(result.activations, "conv1_relu", f.conv1_a);
                capture_into(result.activations, "conv2_relu", f.conv2_a);
                capture_into(result.activations, "fc_relu", f.fc_a);
                break;
        }
        capture_into(result.activations, "logits", f.logits);
    }
    result.logits = std::move(f.logits);
    return result;
}

std::vector<std::string> capture_layer_names(const ModelSpec& spec) {
    switch (spec.arch) {
        case Arch::LinearSoftmax:
            return {"logits"};
        case Arch::MlpOneHidden:
            return {"hidden_relu", "logits"};
        case Arch::ConvOneHidden:
            return {"conv_relu", "logits"};
        case Arch::TinyConvNet:
            return {"conv1_relu", "conv2_relu", "fc_relu", "logits"};
    }
    throw ValidationError("model: unknown architecture");
}

BackwardResult backward(const ModelSpec& spec, const Params& params, const Tensor& batch,
                        const std::vector<int>& labels, RngStream& dropout_stream,
                        NoiseHook* noise, bool noise_in_backward) {
    FwdCache f = run_forward(spec, params, batch, Mode::Train, dropout_stream, noise);
    NoiseHook* bwd_noise = noise_in_backward ? noise : nullptr;

    BackwardResult result;
    Tensor dlogits;
    result.loss = softmax_xent(f.logits, labels, &dlogits);
    for (const auto& [name, shape] : param_layout(spec)) {
        result.grads.tensors.push_back({name, Tensor(shape)});
    }
    Params& grads = result.grads;

    switch (spec.arch) {
        case Arch::LinearSoftmax: {
            FcGrads g = fc_backward(f.x_flat, params.find("fc.w"), dlogits, bwd_noise, false);
            grads.find("fc.w") = std::move(g.weight);
            grads.find("fc.b") = std::move(g.bias);
            break;
        }
        case Arch::MlpOneHidden: {
            FcGrads g2 =
                fc_backward(f.a1_dropped, params.find("fc2.w"), dlogits, bwd_noise, true);
            Tensor da1 = use_dropout(spec, Mode::Train) ? hadamard(g2.input, f.mask) : g2.input;
            Tensor dz1 = relu_backward(f.z1, da1);
            FcGrads g1 = fc_backward(f.x_flat, params.find("fc1.w"), dz1, bwd_noise, false);
            grads.find("fc1.w") = std::move(g1.weight);
            grads.find("fc1.b") = std::move(g1.bias);
            grads.find("fc2.w") = std::move(g2.weight);
            grads.find("fc2.b") = std::move(g2.bias);
            break;
        }
        case Arch::ConvOneHidden: {
            const int pad = (spec.kernel_size - 1) / 2;
            FcGrads gfc =
                fc_backward(f.a1_dropped, params.find("fc.w"), dlogits, bwd_noise, true);
            Tensor dflat =
                use_dropout(spec, Mode::Train) ? hadamard(gfc.input, f.mask) : gfc.input;
            Tensor dconv_a(f.conv1_a.shape, dflat.data);
            Tensor dconv_z = relu_backward(f.conv1_z, dconv_a);
            auto gc = conv2d_backward(f.conv1_in, params.find("conv.w"), dconv_z, pad);
            apply_noise(gc.input, bwd_noise);
            apply_noise(gc.weight, bwd_noise);
            grads.find("conv.w") = std::move(gc.weight);
            grads.find("conv.b") = std::move(gc.bias);
            grads.find("fc.w") = std::move(gfc.weight);
            grads.find("fc.b") = std::move(gfc.bias);
            break;
        }
        case Arch::TinyConvNet: {
            FcGrads g4 =
                fc_backward(f.fc_dropped, params.find("fc2.w"), dlogits, bwd_noise, true);
            Tensor dfc_a =
                use_dropout(spec, Mode::Train) ? hadamard(g4.input, f.fc_mask) : g4.input;
            Tensor dfc_z = relu_backward(f.fc_z, dfc_a);
            FcGrads g3 =
                fc_backward(f.flat_features, params.find("fc1.w"), dfc_z, bwd_noise, true);
            Tensor dpool2(f.pool2.output.shape, g3.input.data);
            Tensor dconv2_a = maxpool2x2_backward(f.pool2, dpool2, f.conv2_a.shape);
            Tensor dconv2_z = relu_backward(f.conv2_z, dconv2_a);
            auto gc2 = conv2d_backward(f.pool1.output, params.find("conv2.w"), dconv2_z, 1);
            apply_noise(gc2.input, bwd_noise);
            apply_noise(gc2.weight, bwd_noise);
            Tensor dconv1_a = maxpool2x2_backward(f.pool1, gc2.input, f.conv1_a.shape);
            Tensor dconv1_z = relu_backward(f.conv1_z, dconv1_a);
            auto gc1 = conv2d_backward(f.conv1_in, params.find("conv1.w"), dconv1_z, 1);
            apply_noise(gc1.input, bwd_noise);
            apply_noise(gc1.weight, bwd_noise);
            grads.find("conv1.w") = std::move(gc1.weight);
            grads.find("conv1.b") = std::move(gc1.bias);
            grads.find("conv2.w") = std::move(gc2.weight);
            grads.find("conv2.b") = std::move(gc2.bias);
            grads.find("fc1.w") = std::move(g3.weight);
            grads.find("fc1.b") = std::move(g3.bias);
            grads.find("fc2.w") = std::move(g4.weight);
            grads.find("fc2.b") = std::move(g4.bias);
            break;
        }
    }
    return result;
}

Tensor evaluate_logits(const ModelSpec& spec, const Params& params, const Tensor& examples) {
    const int n = examples.shape[0];
    const auto [c, h, w] = spec.input_shape;
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    Tensor logits({n, spec.class_count});
    RngStream unused{0};
    constexpr int kChunk = 256;
    for (int start = 0; start < n; start += kChunk) {
        const int count = std::min(kChunk, n - start);
        Tensor chunk({count, c, h, w});
        std::copy(examples.data.begin() + start * stride,
                  examples.data.begin() + (start + count) * stride, chunk.data.begin());
        ForwardResult r = forward(spec, params, chunk, Mode::Eval, unused, nullptr);
        std::copy(r.logits.data.begin(), r.logits.data.end(),
                  logits.data.begin() + static_cast<std::size_t>(start) * spec.class_count);
    }
    return logits;
}

ActivationCapture capture_activations(const ModelSpec& spec, const Params& params,
                                      const Tensor& examples) {
    const int n = examples.shape[0];
    const auto [c, h, w] = spec.input_shape;
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    RngStream unused{0};
    ActivationCapture full;
    constexpr int kChunk = 256;
    for (int start = 0; start < n; start += kChunk) {
        const int count = std::min(kChunk, n - start);
        Tensor chunk({count, c, h, w});
        std::copy(examples.data.begin() + start * stride,
                  examples.data.begin() + (start + count) * stride, chunk.data.begin());
        ForwardResult r = forward(spec, params, chunk, Mode::Eval, unused, nullptr, true);
        for (auto& [name, rows] : r.activations) {
            if (full.find(name) == full.end()) {
                full[name] = Tensor({n, rows.shape[1]});
            }
            std::copy(rows.data.begin(), rows.data.end(),
                      full[name].data.begin() +
                          static_cast<std::size_t>(start) * rows.shape[1]);
        }
    }
    return full;
}

std::string first_layer_weight_name(const ModelSpec& spec) {
    return param_layout(spec).front().first;
}

}  // namespace varlab
