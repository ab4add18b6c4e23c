#include "varlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "varlab/errors.hpp"
#include "varlab/rng.hpp"

namespace varlab {

namespace {

void check_pred_set(const std::vector<PredictionMatrix>& preds, std::size_t min_count) {
    if (preds.size() < min_count) {
        throw ValidationError("metrics: need at least " + std::to_string(min_count) +
                              " prediction matrices");
    }
    for (const auto& p : preds) {
        if (p.logits.rank() != 2) throw ShapeError("metrics: predictions must be rank 2");
        if (p.logits.shape != preds.front().logits.shape) {
            throw ShapeError("metrics: prediction shapes differ");
        }
    }
}

void check_labels(const PredictionMatrix& preds, const std::vector<int>& labels) {
    if (preds.rows() != static_cast<int>(labels.size())) {
        throw ShapeError("metrics: label count " + std::to_string(labels.size()) +
                         " does not match prediction rows " + std::to_string(preds.rows()));
    }
}

double sample_sd(const std::vector<double>& values) {
    const std::size_t n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

// Average ranks (1-based) with ties sharing the mean rank of their block.
std::vector<double> average_ranks(const std::vector<float>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Pearson correlation in double; nullopt when either side is constant.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

double accuracy(const PredictionMatrix& preds, const std::vector<int>& labels) {
    check_labels(preds, labels);
    const int n = preds.rows(), c = preds.cols();
    long correct = 0;
    for (int i = 0; i < n; ++i) {
        if (argmax_row(preds.logits.data.data() + static_cast<std::size_t>(i) * c, c) ==
            labels[i]) {
            ++correct;
        }
    }
    return 100.0 * static_cast<double>(correct) / n;
}

double cross_entropy(const PredictionMatrix& preds, const std::vector<int>& labels) {
    check_labels(preds, labels);
    const int n = preds.rows(), c = preds.cols();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::vector<double> p =
            softmax_row(preds.logits.data.data() + static_cast<std::size_t>(i) * c, c);
        total += -std::log(std::max(p[labels[i]], 1e-12));
    }
    return total / n;
}

std::pair<double, double> sd_with_error(const std::vector<double>& values, int bootstrap_reps,
                                        std::uint64_t seed) {
    const std::size_t n = values.size();
    if (n < 2) throw ValidationError("sd_with_error: need at least 2 values");
    const double sd = sample_sd(values);

    RngStream stream{mix64(seed)};
    std::vector<double> resample(n);
    std::vector<double> sds(static_cast<std::size_t>(bootstrap_reps));
    for (int b = 0; b < bootstrap_reps; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            resample[i] = values[bounded_uint(stream, n)];
        }
        sds[static_cast<std::size_t>(b)] = sample_sd(resample);
    }
    return {sd, sample_sd(sds)};
}

double pairwise_disagreement(const std::vector<PredictionMatrix>& preds) {
    check_pred_set(preds, 2);
    const int n = preds.front().rows(), c = preds.front().cols();
    const std::size_t runs = preds.size();

    std::vector<std::vector<int>> argmaxes(runs, std::vector<int>(n));
    for (std::size_t r = 0; r < runs; ++r) {
        for (int i = 0; i < n; ++i) {
            argmaxes[r][i] =
                argmax_row(preds[r].logits.data.data() + static_cast<std::size_t>(i) * c, c);
        }
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < runs; ++a) {
        for (std::size_t b = a + 1; b < runs; ++b) {
            long differ = 0;
            for (int i = 0; i < n; ++i) {
                if (argmaxes[a][i] != argmaxes[b][i]) ++differ;
            }
            total += 100.0 * static_cast<double>(differ) / n;
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

SpearmanResult pairwise_spearman(const std::vector<PredictionMatrix>& preds) {
    check_pred_set(preds, 2);
    const std::size_t runs = preds.size();
    std::vector<std::vector<double>> ranks(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        ranks[r] = average_ranks(preds[r].logits.data);
    }
    SpearmanResult result;
    double total = 0.0;
    int used = 0;
    for (std::size_t a = 0; a < runs; ++a) {
        for (std::size_t b = a + 1; b < runs; ++b) {
            if (auto rho = pearson(ranks[a], ranks[b])) {
                total += *rho;
                ++used;
            } else {
                ++result.skipped_pairs;
            }
        }
    }
    if (used == 0) throw MetricError("spearman: every pair degenerate");
    result.mean_rho = total / used;
    return result;
}

PredictionMatrix ensemble_predict(const std::vector<PredictionMatrix>& preds) {
    check_pred_set(preds, 2);
    const int n = preds.front().rows(), c = preds.front().cols();
    PredictionMatrix out;
    out.logits = Tensor({n, c});
    std::vector<double> mean(static_cast<std::size_t>(c));
    for (int i = 0; i < n; ++i) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (const auto& p : preds) {
            const std::vector<double> prob =
                softmax_row(p.logits.data.data() + static_cast<std::size_t>(i) * c, c);
            for (int j = 0; j < c; ++j) mean[static_cast<std::size_t>(j)] += prob[j];
        }
        float* row = out.logits.data.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) {
            const double avg = mean[static_cast<std::size_t>(j)] / static_cast<double>(preds.size());
            row[j] = static_cast<float>(std::log(std::max(avg, 1e-12)));
        }
    }
    return out;
}

std::vector<double> ensemble_delta_pairs(const std::vector<PredictionMatrix>& preds,
                                         const std::vector<int>& labels, EnsembleMetric metric) {
    check_pred_set(preds, 2);
    auto eval = [&](const PredictionMatrix& p) {
        return metric == EnsembleMetric::Accuracy ? accuracy(p, labels)
                                                  : cross_entropy(p, labels);
    };
    std::vector<double> member(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) member[i] = eval(preds[i]);

    std::vector<double> deltas;
    for (std::size_t a = 0; a < preds.size(); ++a) {
        for (std::size_t b = a + 1; b < preds.size(); ++b) {
            const PredictionMatrix ens = ensemble_predict({preds[a], preds[b]});
            deltas.push_back(eval(ens) - 0.5 * (member[a] + member[b]));
        }
    }
    return deltas;
}

double ensemble_delta(const std::vector<PredictionMatrix>& preds, const std::vector<int>& labels,
                      EnsembleMetric metric) {
    const std::vector<double> deltas = ensemble_delta_pairs(preds, labels, metric);
    double total = 0.0;
    for (double d : deltas) total += d;
    return total / static_cast<double>(deltas.size());
}

double linear_cka(const Tensor& x, const Tensor& y) {
    if (x.rank() != 2 || y.rank() != 2 || x.shape[0] != y.shape[0]) {
        throw ShapeError("cka: activation matrices must share the example axis");
    }
    const int n = x.shape[0];
    if (n < 2) throw ValidationError("cka: need at least 2 examples");

    auto centered = [&](const Tensor& t) {
        const int f = t.shape[1];
        std::vector<double> out(static_cast<std::size_t>(n) * f);
        for (int j = 0; j < f; ++j) {
            double mean = 0.0;
            for (int i = 0; i < n; ++i) {
                mean += static_cast<double>(t.data[static_cast<std::size_t>(i) * f + j]);
            }
            mean /= n;
            for (int i = 0; i < n; ++i) {
                out[static_cast<std::size_t>(i) * f + j] =
                    static_cast<double>(t.data[static_cast<std::size_t>(i) * f + j]) - mean;
            }
        }
        return out;
    };
    const std::vector<double> xc = centered(x);
    const std::vector<double> yc = centered(y);
    const int fx = x.shape[1], fy = y.shape[1];

    // |A^T B|_F^2 for centered A (n x fa), B (n x fb).
    auto cross_norm_sq = [&](const std::vector<double>& a, int fa, const std::vector<double>& b,
                             int fb) {
        double total = 0.0;
        for (int i = 0; i < fa; ++i) {
            for (int j = 0; j < fb; ++j) {
                double dot = 0.0;
                for (int r = 0; r < n; ++r) {
                    dot += a[static_cast<std::size_t>(r) * fa + i] *
                           b[static_cast<std::size_t>(r) * fb + j];
                }
                total += dot * dot;
            }
        }
        return total;
    };

    const double xx = cross_norm_sq(xc, fx, xc, fx);
    const double yy = cross_norm_sq(yc, fy, yc, fy);
    if (xx == 0.0 || yy == 0.0) {
        throw MetricError("cka: zero-variance activation matrix");
    }
    const double xy = cross_norm_sq(yc, fy, xc, fx);
    return xy / (std::sqrt(xx) * std::sqrt(yy));
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile: empty sample");
    if (p < 0.0 || p > 100.0) throw RangeError("percentile: p out of [0, 100]");
    std::sort(values.begin(), values.end());
    if (p == 0.0) return values.front();
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[rank - 1];
}

MetricsReport report(const std::string& condition_name,
                     const std::vector<PredictionMatrix>& preds,
                     const std::vector<const ActivationCapture*>& activations,
                     const std::vector<int>& labels, const ReportOptions& options) {
    check_pred_set(preds, 2);
    MetricsReport rep;
    rep.condition = condition_name;
    rep.runs = static_cast<int>(preds.size());
    rep.options = options;

    std::vector<double> accs, ces;
    for (const auto& p : preds) {
        accs.push_back(accuracy(p, labels));
        ces.push_back(cross_entropy(p, labels));
    }
    std::tie(rep.accuracy_sd, rep.accuracy_sd_err) =
        sd_with_error(accs, options.bootstrap_reps, options.bootstrap_seed);
    std::tie(rep.ce_sd, rep.ce_sd_err) =
        sd_with_error(ces, options.bootstrap_reps, options.bootstrap_seed);
    rep.pairwise_disagree = pairwise_disagreement(preds);
    const SpearmanResult spearman = pairwise_spearman(preds);
    rep.pairwise_spearman = spearman.mean_rho;
    rep.spearman_skipped_pairs = spearman.skipped_pairs;
    rep.ensemble_delta_acc = ensemble_delta(preds, labels, EnsembleMetric::Accuracy);

    if (options.with_cka && !activations.empty()) {
        if (activations.size() != preds.size()) {
            throw ValidationError("report: activation captures must match run count");
        }
        // Cap the models entering the O(R^2) CKA loop; the subset choice is
        // seeded and recorded.
        std::vector<std::size_t> chosen(activations.size());
        std::iota(chosen.begin(), chosen.end(), std::size_t{0});
        if (static_cast<int>(chosen.size()) > options.cka_pair_cap) {
            RngStream stream{mix64(options.cka_subset_seed)};
            for (std::size_t i = chosen.size() - 1; i > 0; --i) {
                const std::size_t j = bounded_uint(stream, i + 1);
                std::swap(chosen[i], chosen[j]);
            }
            chosen.resize(static_cast<std::size_t>(options.cka_pair_cap));
            std::sort(chosen.begin(), chosen.end());
        }
        rep.cka_models_used = static_cast<int>(chosen.size());
        for (const auto& [layer, unused] : *activations.front()) {
            double total = 0.0;
            int pairs = 0;
            for (std::size_t a = 0; a < chosen.size(); ++a) {
                for (std::size_t b = a + 1; b < chosen.size(); ++b) {
                    total += linear_cka(activations[chosen[a]]->at(layer),
                                        activations[chosen[b]]->at(layer));
                    ++pairs;
                }
            }
            rep.cka[layer] = total / pairs;
        }
    }
    return rep;
}

}  // namespace varlab
