#pragma once

#include "varlab/dataset.hpp"
#include "varlab/models.hpp"
#include "varlab/predictions.hpp"
#include "varlab/train.hpp"

namespace varlab {

/// Deterministic test-time augmentation geometry. View count is
/// (flip ? 2 : 1) * (crop ? ceil((2 pad + 1) / stride)^2 : 1).
struct TtaSpec {
    bool flip = false;
    bool crop = false;
    int pad_pixels = 0;
    int stride = 1;

    int view_count() const;
    void validate() const;

    bool any() const { return flip || crop; }
};

/// Enumerate the views of one example: zero-pad, slide the full-size crop
/// window over the offset grid (row-major, offsets 0, stride, ... <=
/// 2 pad), then append the horizontal flip of every view. No randomness.
std::vector<Tensor> tta_views(const Tensor& image, const TtaSpec& spec);

/// Per example, mean softmax probability over all views in eval mode (no
/// noise hook anywhere). All-off spec returns the plain eval predictions
/// bitwise.
PredictionMatrix tta_predict(const ModelSpec& spec, const Params& params, const Dataset& test,
                             const TtaSpec& tta);

/// Mean softmax probability over the run's snapshot predictions. Requires
/// a cyclic run with at least 2 snapshots.
PredictionMatrix snapshot_ensemble_predict(const RunRecord& run);

/// TTA applied to each snapshot's parameters, averaged uniformly over the
/// snapshot x view grid.
PredictionMatrix combine(const ModelSpec& spec, const RunRecord& run, const Dataset& test,
                         const TtaSpec& tta);

}  // namespace varlab
