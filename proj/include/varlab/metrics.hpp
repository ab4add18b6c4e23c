#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "varlab/models.hpp"
#include "varlab/predictions.hpp"

namespace varlab {

/// Percent of examples whose argmax (ties -> lowest class) matches the
/// label.
double accuracy(const PredictionMatrix& preds, const std::vector<int>& labels);

/// Mean over examples of -log p(true class), probabilities clamped at
/// 1e-12. Nats, binary64.
double cross_entropy(const PredictionMatrix& preds, const std::vector<int>& labels);

/// Sample standard deviation (n-1) plus a bootstrap estimate of its own
/// standard deviation (resamples with replacement, seeded, deterministic).
std::pair<double, double> sd_with_error(const std::vector<double>& values, int bootstrap_reps,
                                        std::uint64_t seed);

/// Mean over all pairs of the percent of examples whose argmaxes differ.
double pairwise_disagreement(const std::vector<PredictionMatrix>& preds);

struct SpearmanResult {
    double mean_rho = 0.0;
    int skipped_pairs = 0;  // pairs with a constant flattened vector
};

/// Per pair: flatten logits row-major, rank with average ranks for ties,
/// Pearson correlation of the ranks; mean over pairs.
SpearmanResult pairwise_spearman(const std::vector<PredictionMatrix>& preds);

/// Element-wise mean of softmax probabilities, stored as log-probabilities
/// (clamped at 1e-12) in the logits slot.
PredictionMatrix ensemble_predict(const std::vector<PredictionMatrix>& preds);

enum class EnsembleMetric { Accuracy, CrossEntropy };

/// Mean over all pairs of metric(ensemble(pair)) - mean of the members'
/// metrics.
double ensemble_delta(const std::vector<PredictionMatrix>& preds, const std::vector<int>& labels,
                      EnsembleMetric metric);

/// Per-pair deltas in pair order (i, j), i < j; used for sign-consistency
/// checks.
std::vector<double> ensemble_delta_pairs(const std::vector<PredictionMatrix>& preds,
                                         const std::vector<int>& labels, EnsembleMetric metric);

/// Linear centered kernel alignment between two activation matrices
/// (rows = examples). Column-centers both, then
/// |Y^T X|_F^2 / (|X^T X|_F |Y^T Y|_F). Throws MetricError when either
/// matrix has zero variance.
double linear_cka(const Tensor& x, const Tensor& y);

/// Nearest-rank percentile of an unsorted sample, p in [0, 100].
double nearest_rank_percentile(std::vector<double> values, double p);

struct ReportOptions {
    int bootstrap_reps = 1000;
    std::uint64_t bootstrap_seed = 1;
    bool with_cka = false;
    int cka_pair_cap = 25;          // max models entering the CKA pairs
    std::uint64_t cka_subset_seed = 1;
};

/// The Table-1-shaped columns for one condition.
struct MetricsReport {
    std::string condition;
    int runs = 0;
    double accuracy_sd = 0.0, accuracy_sd_err = 0.0;  // percentage points
    double ce_sd = 0.0, ce_sd_err = 0.0;              // nats
    double pairwise_disagree = 0.0;                   // percent
    double pairwise_spearman = 0.0;                   // mean rho
    int spearman_skipped_pairs = 0;
    double ensemble_delta_acc = 0.0;                  // percentage points
    std::map<std::string, double> cka;                // layer -> mean CKA over pairs
    ReportOptions options;
    int cka_models_used = 0;
};

/// Assemble every column from a set of prediction matrices (plus, when
/// with_cka is set, per-run activation captures keyed consistently across
/// runs). Deterministic given inputs and options.
MetricsReport report(const std::string& condition_name,
                     const std::vector<PredictionMatrix>& preds,
                     const std::vector<const ActivationCapture*>& activations,
                     const std::vector<int>& labels, const ReportOptions& options);

}  // namespace varlab
