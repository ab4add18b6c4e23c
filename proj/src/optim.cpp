#include "varlab/optim.hpp"

#include <cmath>

#include "varlab/errors.hpp"

namespace varlab {

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (!(max_lr > 0.0f)) throw ValidationError("config: max_lr must be > 0");
    if (warmup_epochs < 0 || warmup_epochs >= epochs) {
        throw ValidationError("config: warmup_epochs must lie in [0, epochs)");
    }
    if (!(momentum >= 0.0f && momentum < 1.0f)) {
        throw ValidationError("config: momentum must lie in [0, 1)");
    }
    if (weight_decay < 0.0f) throw ValidationError("config: weight_decay must be >= 0");
    if (lowlevel_noise_rel < 0.0f) {
        throw ValidationError("config: lowlevel_noise_rel must be >= 0");
    }
    if (schedule == Schedule::Cyclic) {
        if (cycles < 1 || epochs % cycles != 0) {
            throw ValidationError("config: cycles must be >= 1 and divide epochs");
        }
        if (warmup_epochs >= epochs / cycles) {
            throw ValidationError("config: warmup must fit inside the first cycle");
        }
    }
    if (grad_clip_norm && !(*grad_clip_norm > 0.0f)) {
        throw ValidationError("config: grad_clip_norm must be > 0 when set");
    }
    if (augment.pad_pixels < 0) throw ValidationError("config: pad_pixels must be >= 0");
}

namespace {

// Cosine over a span of `span` steps; local step s in [0, span).
// s = span-1 maps to t = 1 so the segment ends at lr = 0 exactly.
float cosine_lr(float max_lr, int s, int span) {
    const double t = span > 1 ? static_cast<double>(s) / (span - 1) : 1.0;
    return static_cast<float>(max_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t)));
}

}  // namespace

float lr_at(const TrainConfig& config, int step, int steps_per_epoch) {
    const int total = config.epochs * steps_per_epoch;
    if (step < 0 || step >= total) {
        throw RangeError("lr_at: step out of range");
    }
    if (config.schedule == Schedule::Constant) {
        const int warmup = config.warmup_epochs * steps_per_epoch;
        if (step < warmup) {
            return static_cast<float>(static_cast<double>(config.max_lr) * step / warmup);
        }
        return config.max_lr;
    }
    const int segments = config.schedule == Schedule::Cyclic ? config.cycles : 1;
    const int seg_len = total / segments;
    const int seg = step / seg_len;
    const int local = step % seg_len;
    if (seg == 0) {
        const int warmup = config.warmup_epochs * steps_per_epoch;
        if (local < warmup) {
            return static_cast<float>(static_cast<double>(config.max_lr) * local / warmup);
        }
        return cosine_lr(config.max_lr, local - warmup, seg_len - warmup);
    }
    return cosine_lr(config.max_lr, local, seg_len);
}

std::vector<int> epoch_shuffle(int n, std::uint64_t seed, int epoch) {
    if (n < 1) throw RangeError("epoch_shuffle: n must be >= 1");
    RngStream stream = derive_stream(seed, SourceId::DataShuffle, epoch);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(bounded_uint(stream, static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

OptState OptState::init(const Params& params, const TrainConfig& config) {
    OptState s;
    auto zeros_like = [&] {
        std::vector<Tensor> v;
        v.reserve(params.tensors.size());
        for (const auto& nt : params.tensors) v.emplace_back(nt.tensor.shape);
        return v;
    };
    if (config.optimizer == OptimizerKind::Sgd) {
        s.velocity = zeros_like();
    } else {
        s.moment1 = zeros_like();
        s.moment2 = zeros_like();
    }
    return s;
}

void optimizer_step(Params& params, const Params& grads, OptState& state, float lr,
                    const TrainConfig& config) {
    if (grads.tensors.size() != params.tensors.size()) {
        throw ShapeError("optimizer_step: gradient layout mismatch");
    }

    double sq_norm = 0.0;
    for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
        const Tensor& g = grads.tensors[t].tensor;
        if (!g.same_shape(params.tensors[t].tensor)) {
            throw ShapeError("optimizer_step: gradient shape mismatch at " +
                             grads.tensors[t].name);
        }
        for (float v : g.data) {
            if (!std::isfinite(v)) {
                throw NonFiniteError("optimizer_step: non-finite gradient in " +
                                     grads.tensors[t].name);
            }
            sq_norm += static_cast<double>(v) * static_cast<double>(v);
        }
    }

    float clip_scale = 1.0f;
    if (config.grad_clip_norm) {
        const double norm = std::sqrt(sq_norm);
        if (norm > static_cast<double>(*config.grad_clip_norm)) {
            clip_scale = static_cast<float>(static_cast<double>(*config.grad_clip_norm) / norm);
        }
    }

    state.step_count += 1;
    const float wd = config.weight_decay;

    if (config.optimizer == OptimizerKind::Sgd) {
        const float m = config.momentum;
        for (std::size_t t = 0; t < params.tensors.size(); ++t) {
            float* w = params.tensors[t].tensor.data.data();
            const float* g = grads.tensors[t].tensor.data.data();
            float* v = state.velocity[t].data.data();
            const std::size_t n = params.tensors[t].tensor.size();
            for (std::size_t i = 0; i < n; ++i) {
                const float gi = g[i] * clip_scale;
                v[i] = m * v[i] + (gi + wd * w[i]);
                w[i] = w[i] - lr * v[i];
            }
        }
        return;
    }

    const AdamParams& a = config.adam;
    const double bc1 = 1.0 - std::pow(static_cast<double>(a.beta1),
                                      static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(static_cast<double>(a.beta2),
                                      static_cast<double>(state.step_count));
    const float inv_bc1 = static_cast<float>(1.0 / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        float* w = params.tensors[t].tensor.data.data();
        const float* g = grads.tensors[t].tensor.data.data();
        float* m1 = state.moment1[t].data.data();
        float* m2 = state.moment2[t].data.data();
        const std::size_t n = params.tensors[t].tensor.size();
        for (std::size_t i = 0; i < n; ++i) {
            const float gi = g[i] * clip_scale + wd * w[i];
            m1[i] = a.beta1 * m1[i] + (1.0f - a.beta1) * gi;
            m2[i] = a.beta2 * m2[i] + (1.0f - a.beta2) * gi * gi;
            const float mhat = m1[i] * inv_bc1;
            const float vhat = m2[i] * inv_bc2;
            w[i] = w[i] - lr * mhat / (std::sqrt(vhat) + a.epsilon);
        }
    }
}

}  // namespace varlab
