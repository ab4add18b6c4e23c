#include "varlab/train.hpp"

#include <cmath>

#include "json.hpp"
#include "varlab/digest.hpp"
#include "varlab/errors.hpp"
#include "varlab/serialize.hpp"

namespace varlab {

namespace {

// Test metrics inline so training does not depend on the metrics module.
std::pair<double, double> eval_accuracy_ce(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.shape[0], c = logits.shape[1];
    long correct = 0;
    double ce = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* row = logits.data.data() + static_cast<std::size_t>(i) * c;
        if (argmax_row(row, c) == labels[i]) ++correct;
        const std::vector<double> p = softmax_row(row, c);
        ce += -std::log(std::max(p[labels[i]], 1e-12));
    }
    return {100.0 * static_cast<double>(correct) / n, ce / n};
}

}  // namespace

std::pair<RngStream, Tensor> lowlevel_noise_hook(Tensor output, RngStream stream, float rel) {
    apply_lowlevel_noise(output, stream, rel);
    return {stream, std::move(output)};
}

std::string run_id_for(const std::string& config_digest, const RunInputs& inputs) {
    nlohmann::json j;
    j["config"] = config_digest;
    j["seeds"] = inputs.seeds.seeds;
    if (inputs.onset) {
        j["onset"] = {{"source", static_cast<std::uint32_t>(inputs.onset->source)},
                      {"seed", inputs.onset->seed},
                      {"epoch", inputs.onset->epoch}};
    }
    if (inputs.bitflip_seed) {
        j["bitflip_seed"] = *inputs.bitflip_seed;
    }
    return sha256_hex(j.dump()).substr(0, 16);
}

RunRecord train_run(const ModelSpec& spec, const TrainConfig& config, const Dataset& train,
                    const Dataset& test, const RunInputs& inputs,
                    const std::string& config_digest) {
    spec.validate();
    config.validate();
    train.validate();
    test.validate();
    const auto [c, h, w] = spec.input_shape;
    if (train.example_shape() != std::array<int, 3>{c, h, w} ||
        train.class_count != spec.class_count) {
        throw ValidationError("train_run: dataset does not match model input shape");
    }
    if (inputs.onset && (inputs.onset->epoch < 0 || inputs.onset->epoch > config.epochs)) {
        throw ValidationError("train_run: onset epoch out of range");
    }

    // Baseline seeds before the onset switch, per-run seed from it on.
    auto effective_seed = [&](SourceId source, int epoch) -> std::uint64_t {
        if (inputs.onset && inputs.onset->source == source && epoch >= inputs.onset->epoch) {
            return inputs.onset->seed;
        }
        return inputs.seeds.seed(source);
    };

    RunRecord record;
    record.config_digest = config_digest;
    record.inputs = inputs;
    record.run_id = run_id_for(config_digest, inputs);

    Params params = init_params(
        spec, derive_stream(effective_seed(SourceId::ParamInit, 0), SourceId::ParamInit, 0));
    if (inputs.bitflip_seed) {
        auto [flipped, desc] = apply_random_bit_flip(
            spec, std::move(params),
            derive_stream(*inputs.bitflip_seed, SourceId::BitFlip, 0));
        params = std::move(flipped);
        record.bitflip = desc;
    }

    OptState opt_state = OptState::init(params, config);
    const int n_train = train.size();
    const int steps_per_epoch = (n_train + config.batch_size - 1) / config.batch_size;
    const int segment_epochs =
        config.schedule == Schedule::Cyclic ? config.epochs / config.cycles : config.epochs;
    const std::size_t example_elems = static_cast<std::size_t>(c) * h * w;

    int global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<int> perm =
            epoch_shuffle(n_train, effective_seed(SourceId::DataShuffle, epoch), epoch);
        RngStream augment_stream = derive_stream(effective_seed(SourceId::DataAugment, epoch),
                                                 SourceId::DataAugment, epoch);
        RngStream dropout_stream = derive_stream(
            effective_seed(SourceId::StochasticReg, epoch), SourceId::StochasticReg, epoch);
        const std::uint64_t noise_seed = effective_seed(SourceId::LowLevelNoise, epoch);
        NoiseHook hook;
        const bool noise_on = noise_seed != SeedVector::kNoiseOff;
        if (noise_on) {
            hook.stream = derive_stream(noise_seed, SourceId::LowLevelNoise, epoch);
            hook.rel = config.lowlevel_noise_rel;
        }

        double loss_sum = 0.0;
        for (int start = 0; start < n_train; start += config.batch_size) {
            const int count = std::min(config.batch_size, n_train - start);
            Tensor batch({count, c, h, w});
            std::vector<int> labels(count);
            for (int i = 0; i < count; ++i) {
                const int src = perm[start + i];
                labels[i] = train.labels[src];
                if (config.augment.any()) {
                    Tensor augmented =
                        augment(train.example(src), config.augment, augment_stream);
                    std::copy(augmented.data.begin(), augmented.data.end(),
                              batch.data.begin() + static_cast<std::size_t>(i) * example_elems);
                } else {
                    const float* raw =
                        train.images.data.data() + static_cast<std::size_t>(src) * example_elems;
                    std::copy(raw, raw + example_elems,
                              batch.data.begin() + static_cast<std::size_t>(i) * example_elems);
                }
            }

            BackwardResult bwd = backward(spec, params, batch, labels, dropout_stream,
                                          noise_on ? &hook : nullptr, config.noise_in_backward);
            if (!std::isfinite(bwd.loss)) {
                throw NonFiniteError("train_run: non-finite loss at epoch " +
                                     std::to_string(epoch) + ", step " +
                                     std::to_string(global_step));
            }
            loss_sum += bwd.loss * count;
            const float lr = lr_at(config, global_step, steps_per_epoch);
            optimizer_step(params, bwd.grads, opt_state, lr, config);
            ++global_step;
        }

        EpochStats stats;
        stats.train_loss = loss_sum / n_train;
        const Tensor test_logits = evaluate_logits(spec, params, test.images);
        std::tie(stats.test_accuracy, stats.test_ce) = eval_accuracy_ce(test_logits, test.labels);
        record.history.push_back(stats);

        if (config.schedule == Schedule::Cyclic && (epoch + 1) % segment_epochs == 0) {
            record.snapshot_params.push_back(params);
            record.snapshot_preds.push_back(PredictionMatrix{test_logits});
        }
        if (epoch + 1 == config.epochs) {
            record.final_preds = PredictionMatrix{test_logits};
        }
    }

    record.activations = capture_activations(spec, params, test.images);
    record.final_params = std::move(params);
    const std::vector<unsigned char> payload = params_payload(record.final_params);
    record.params_digest = sha256_hex(payload.data(), payload.size());
    return record;
}

}  // namespace varlab
