#include "varlab/mitigation.hpp"

#include <cmath>

#include "varlab/augment.hpp"
#include "varlab/errors.hpp"

namespace varlab {

namespace {

// Mean softmax probability across member prediction matrices, stored as
// clamped log-probabilities.
PredictionMatrix probability_mean(const std::vector<const PredictionMatrix*>& members) {
    const int n = members.front()->rows(), c = members.front()->cols();
    PredictionMatrix out;
    out.logits = Tensor({n, c});
    std::vector<double> mean(static_cast<std::size_t>(c));
    for (int i = 0; i < n; ++i) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (const PredictionMatrix* m : members) {
            const std::vector<double> p =
                softmax_row(m->logits.data.data() + static_cast<std::size_t>(i) * c, c);
            for (int j = 0; j < c; ++j) mean[static_cast<std::size_t>(j)] += p[j];
        }
        float* row = out.logits.data.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) {
            row[j] = static_cast<float>(
                std::log(std::max(mean[static_cast<std::size_t>(j)] / members.size(), 1e-12)));
        }
    }
    return out;
}

}  // namespace

int TtaSpec::view_count() const {
    const int grid = crop ? (2 * pad_pixels + stride) / stride : 1;  // ceil((2p+1)/stride)
    return (flip ? 2 : 1) * (crop ? grid * grid : 1);
}

void TtaSpec::validate() const {
    if (stride < 1) throw ValidationError("tta: stride must be >= 1");
    if (pad_pixels < 0) throw ValidationError("tta: pad must be >= 0");
    if (crop && pad_pixels < 1) throw ValidationError("tta: crop requires pad >= 1");
}

std::vector<Tensor> tta_views(const Tensor& image, const TtaSpec& spec) {
    spec.validate();
    std::vector<Tensor> views;
    if (spec.crop) {
        const int h = image.shape[1], w = image.shape[2];
        const Tensor padded = zero_pad(image, spec.pad_pixels);
        for (int row = 0; row <= 2 * spec.pad_pixels; row += spec.stride) {
            for (int col = 0; col <= 2 * spec.pad_pixels; col += spec.stride) {
                views.push_back(crop(padded, row, col, h, w));
            }
        }
    } else {
        views.push_back(image);
    }
    if (spec.flip) {
        const std::size_t base = views.size();
        for (std::size_t i = 0; i < base; ++i) {
            views.push_back(flip_horizontal(views[i]));
        }
    }
    return views;
}

PredictionMatrix tta_predict(const ModelSpec& spec, const Params& params, const Dataset& test,
                             const TtaSpec& tta) {
    tta.validate();
    if (!tta.any()) {
        return PredictionMatrix{evaluate_logits(spec, params, test.images)};
    }
    const int n = test.size();
    const int c = spec.class_count;
    const int views = tta.view_count();
    const auto [ci, h, w] = spec.input_shape;
    const std::size_t elems = static_cast<std::size_t>(ci) * h * w;

    // Assemble one large batch of views per slab of examples, then average
    // probabilities view-wise. Grouping is numerically irrelevant: each
    // row's forward pass is independent.
    PredictionMatrix out;
    out.logits = Tensor({n, c});
    constexpr int kSlab = 64;
    std::vector<double> mean(static_cast<std::size_t>(c));
    for (int start = 0; start < n; start += kSlab) {
        const int count = std::min(kSlab, n - start);
        Tensor batch({count * views, ci, h, w});
        for (int i = 0; i < count; ++i) {
            const std::vector<Tensor> v = tta_views(test.example(start + i), tta);
            for (int k = 0; k < views; ++k) {
                std::copy(v[static_cast<std::size_t>(k)].data.begin(),
                          v[static_cast<std::size_t>(k)].data.end(),
                          batch.data.begin() +
                              (static_cast<std::size_t>(i) * views + k) * elems);
            }
        }
        const Tensor logits = evaluate_logits(spec, params, batch);
        for (int i = 0; i < count; ++i) {
            std::fill(mean.begin(), mean.end(), 0.0);
            for (int k = 0; k < views; ++k) {
                const std::vector<double> p = softmax_row(
                    logits.data.data() +
                        (static_cast<std::size_t>(i) * views + k) * c,
                    c);
                for (int j = 0; j < c; ++j) mean[static_cast<std::size_t>(j)] += p[j];
            }
            float* row = out.logits.data.data() + static_cast<std::size_t>(start + i) * c;
            for (int j = 0; j < c; ++j) {
                row[j] = static_cast<float>(
                    std::log(std::max(mean[static_cast<std::size_t>(j)] / views, 1e-12)));
            }
        }
    }
    return out;
}

PredictionMatrix snapshot_ensemble_predict(const RunRecord& run) {
    if (run.snapshot_preds.size() < 2) {
        throw ValidationError("snapshot ensemble: run has fewer than 2 snapshots");
    }
    std::vector<const PredictionMatrix*> members;
    for (const auto& p : run.snapshot_preds) members.push_back(&p);
    return probability_mean(members);
}

PredictionMatrix combine(const ModelSpec& spec, const RunRecord& run, const Dataset& test,
                         const TtaSpec& tta) {
    if (run.snapshot_params.empty()) {
        throw ValidationError("combine: run carries no snapshot parameters");
    }
    // Equal view counts per snapshot make the uniform snapshot x view mean
    // equal to the mean of per-snapshot TTA probability means.
    std::vector<PredictionMatrix> per_snapshot;
    for (const Params& p : run.snapshot_params) {
        per_snapshot.push_back(tta_predict(spec, p, test, tta));
    }
    if (per_snapshot.size() == 1) return per_snapshot.front();
    std::vector<const PredictionMatrix*> members;
    for (const auto& p : per_snapshot) members.push_back(&p);
    return probability_mean(members);
}

}  // namespace varlab
