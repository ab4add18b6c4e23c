#pragma once

#include <vector>

#include "varlab/tensor.hpp"

namespace varlab {

/// Logits of one model over a fixed test set, one row per example.
/// Probabilities derive via row softmax (max-subtracted, computed in
/// binary64). Ensembled predictions store log-probabilities in the logits
/// slot, which softmax maps back to the same probabilities.
struct PredictionMatrix {
    Tensor logits;  // N x C

    int rows() const { return logits.shape.empty() ? 0 : logits.shape[0]; }
    int cols() const { return logits.rank() < 2 ? 0 : logits.shape[1]; }
};

/// Row softmax of one row, in double.
std::vector<double> softmax_row(const float* row, int n);

/// Argmax with ties resolved to the lowest class index.
int argmax_row(const float* row, int n);

}  // namespace varlab
