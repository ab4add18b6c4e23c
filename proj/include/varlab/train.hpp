#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "varlab/dataset.hpp"
#include "varlab/optim.hpp"
#include "varlab/perturb.hpp"
#include "varlab/predictions.hpp"

namespace varlab {

/// Per-source seed assignment for one training run. The LowLevelNoise
/// entry uses 0 as the deterministic sentinel: sentinel means the noise
/// hook is off, anything else seeds it. The other sources are always
/// mechanically active (their effect can still be inert, e.g. dropout
/// rate 0 makes StochasticReg a no-op).
struct SeedVector {
    static constexpr std::uint64_t kNoiseOff = 0;

    std::array<std::uint64_t, kNumSources> seeds = {1, 1, 1, 1, kNoiseOff};

    std::uint64_t seed(SourceId s) const { return seeds[static_cast<std::size_t>(s)]; }
    void set(SourceId s, std::uint64_t v) { seeds[static_cast<std::size_t>(s)] = v; }
    bool noise_enabled() const { return seed(SourceId::LowLevelNoise) != kNoiseOff; }

    bool operator==(const SeedVector&) const = default;
};

/// From `epoch` on, `source` draws from `seed` instead of the baseline in
/// the SeedVector. epoch == config.epochs expresses "never switch".
struct OnsetSwitch {
    SourceId source = SourceId::DataShuffle;
    std::uint64_t seed = 1;
    int epoch = 0;

    bool operator==(const OnsetSwitch&) const = default;
};

struct RunInputs {
    SeedVector seeds;
    std::optional<OnsetSwitch> onset;
    std::optional<std::uint64_t> bitflip_seed;
    int replicate = 0;
};

struct EpochStats {
    double train_loss = 0.0;     // epoch mean cross-entropy per example
    double test_accuracy = 0.0;  // percentage points
    double test_ce = 0.0;        // nats
};

/// Complete outcome of one training run.
struct RunRecord {
    std::string run_id;
    std::string config_digest;
    RunInputs inputs;
    std::optional<BitFlipDescriptor> bitflip;
    std::vector<EpochStats> history;
    PredictionMatrix final_preds;
    std::vector<PredictionMatrix> snapshot_preds;  // cyclic schedules only
    std::vector<Params> snapshot_params;           // parallel to snapshot_preds
    ActivationCapture activations;
    Params final_params;
    std::string params_digest;
};

/// Spec-shaped wrapper around the noise hook body (see models.hpp):
/// returns the advanced stream and the perturbed tensor.
std::pair<RngStream, Tensor> lowlevel_noise_hook(Tensor output, RngStream stream, float rel);

/// Content address of a run: first 16 hex chars of the digest over
/// (config digest, seeds, onset, bitflip seed).
std::string run_id_for(const std::string& config_digest, const RunInputs& inputs);

/// Execute one full training run. Pure function of its arguments: repeated
/// executions yield byte-identical params and prediction digests.
RunRecord train_run(const ModelSpec& spec, const TrainConfig& config, const Dataset& train,
                    const Dataset& test, const RunInputs& inputs,
                    const std::string& config_digest);

}  // namespace varlab
