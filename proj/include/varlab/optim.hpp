#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "varlab/augment.hpp"
#include "varlab/models.hpp"

namespace varlab {

enum class Schedule { Cosine, Cyclic, Constant };
enum class OptimizerKind { Sgd, Adam };

struct AdamParams {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    float max_lr = 0.1f;
    int warmup_epochs = 2;
    Schedule schedule = Schedule::Cosine;
    int cycles = 1;  // cyclic only; must divide epochs
    float momentum = 0.9f;
    float weight_decay = 5e-4f;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    AdamParams adam;
    std::optional<float> grad_clip_norm;
    float lowlevel_noise_rel = 3e-5f;
    bool noise_in_backward = true;
    AugmentationSpec augment;

    void validate() const;
};

/// Learning rate at a global step. Linear ramp 0 -> max_lr across the
/// warmup steps, then cosine decay max_lr * (1 + cos(pi t)) / 2 where t
/// runs 0 -> 1 over the post-warmup steps (last step maps to exactly 1).
/// Cyclic restarts the cosine in each of `cycles` equal segments; warmup
/// applies inside the first segment only.
float lr_at(const TrainConfig& config, int step, int steps_per_epoch);

/// Fisher-Yates permutation of 0..n-1 driven by
/// derive_stream(seed, DataShuffle, epoch).
std::vector<int> epoch_shuffle(int n, std::uint64_t seed, int epoch);

struct OptState {
    std::vector<Tensor> velocity;  // sgd momentum buffers
    std::vector<Tensor> moment1;   // adam
    std::vector<Tensor> moment2;   // adam
    std::int64_t step_count = 0;

    static OptState init(const Params& params, const TrainConfig& config);
};

/// One optimizer update, in place. SGD: v <- m v + (g + wd w); w <- w - lr v.
/// Adam: bias-corrected moments, weight decay added to the gradient.
/// Optional global-norm clipping (norm accumulated in binary64 over all
/// gradient tensors in order) rescales gradients before the update.
/// Throws NonFiniteError when any gradient is non-finite.
void optimizer_step(Params& params, const Params& grads, OptState& state, float lr,
                    const TrainConfig& config);

}  // namespace varlab
