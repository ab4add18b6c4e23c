#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "varlab/kernels.hpp"
#include "varlab/metrics.hpp"
#include "varlab/rng.hpp"

using namespace varlab;

namespace {

PredictionMatrix from_rows(const std::vector<std::vector<float>>& rows) {
    const int n = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows.front().size());
    PredictionMatrix m;
    m.logits = Tensor({n, c});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
            m.logits.at2(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

PredictionMatrix random_preds(int n, int c, RngStream& s) {
    PredictionMatrix m;
    m.logits = Tensor({n, c});
    for (float& v : m.logits.data) v = gaussian(s);
    return m;
}

}  // namespace

TEST_CASE("accuracy on one-hot-correct logits is 100") {
    const PredictionMatrix m = from_rows({{5, 0, 0}, {0, 5, 0}, {0, 0, 5}});
    CHECK(accuracy(m, {0, 1, 2}) == 100.0);
}

TEST_CASE("uniform logits predict class 0 everywhere (tie rule)") {
    const PredictionMatrix m = from_rows({{1, 1, 1}, {1, 1, 1}});
    CHECK(accuracy(m, {0, 0}) == 100.0);
    CHECK(accuracy(m, {1, 2}) == 0.0);
}

TEST_CASE("accuracy matches a hand count on a fixed 10x3 fixture") {
    RngStream s{12};
    const PredictionMatrix m = random_preds(10, 3, s);
    std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    long correct = 0;
    for (int i = 0; i < 10; ++i) {
        int best = 0;
        for (int j = 1; j < 3; ++j) {
            if (m.logits.at2(i, j) > m.logits.at2(i, best)) best = j;
        }
        if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    CHECK(accuracy(m, labels) == doctest::Approx(10.0 * static_cast<double>(correct)));
}

TEST_CASE("cross entropy of uniform logits is ln C") {
    const PredictionMatrix m = from_rows({{2, 2, 2, 2, 2, 2, 2, 2, 2, 2}});
    CHECK(cross_entropy(m, {7}) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("large margin drives cross entropy to the clamp region") {
    const PredictionMatrix m = from_rows({{50, 0}});
    CHECK(cross_entropy(m, {0}) < 1e-20);
    // the wrong class saturates at the 1e-12 clamp
    CHECK(cross_entropy(m, {1}) == doctest::Approx(-std::log(1e-12)).epsilon(1e-6));
}

TEST_CASE("cross entropy matches a binary64 hand computation") {
    const PredictionMatrix m = from_rows({{1, 2, 3}, {0, 0, 1}, {-1, -2, -3}});
    const std::vector<int> labels = {2, 0, 0};
    const auto probs = oracle::softmax_rows(m);
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) {
        expected += -std::log(probs[static_cast<std::size_t>(i)]
                                   [static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]);
    }
    expected /= 3.0;
    CHECK(cross_entropy(m, labels) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sd_with_error basics") {
    CHECK_THROWS_AS(sd_with_error({1.0}, 100, 1), ValidationError);
    auto [sd0, err0] = sd_with_error({3.0, 3.0, 3.0, 3.0}, 200, 1);
    CHECK(sd0 == 0.0);
    CHECK(err0 == 0.0);
    auto [sd1, err1] = sd_with_error({0.0, 1.0}, 200, 1);
    CHECK(sd1 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

    // determinism
    auto [sd2, err2] = sd_with_error({0.0, 1.0, 2.0, 5.0}, 500, 42);
    auto [sd3, err3] = sd_with_error({0.0, 1.0, 2.0, 5.0}, 500, 42);
    CHECK(sd2 == sd3);
    CHECK(err2 == err3);
}

TEST_CASE("bootstrap error tracks the normal-theory value") {
    RngStream s{555};
    std::vector<double> values;
    for (int i = 0; i < 100; ++i) values.push_back(gaussian(s));
    auto [sd, err] = sd_with_error(values, 1000, 7);
    const double analytic = sd / std::sqrt(2.0 * 99.0);
    CHECK(err > 0.7 * analytic);
    CHECK(err < 1.3 * analytic);
}

TEST_CASE("pairwise disagreement basics and brute-force agreement") {
    const PredictionMatrix a = from_rows({{1, 0}, {1, 0}, {1, 0}, {1, 0}});
    CHECK(pairwise_disagreement({a, a}) == 0.0);

    const PredictionMatrix b = from_rows({{0, 1}, {1, 0}, {1, 0}, {1, 0}});
    CHECK(pairwise_disagreement({a, b}) == doctest::Approx(25.0));

    RngStream s{77};
    std::vector<PredictionMatrix> three;
    for (int i = 0; i < 3; ++i) three.push_back(random_preds(8, 4, s));
    CHECK(pairwise_disagreement(three) ==
          doctest::Approx(oracle::naive_disagreement(three)).epsilon(1e-12));
}

TEST_CASE("spearman basics") {
    RngStream s{78};
    const PredictionMatrix a = random_preds(6, 3, s);
    CHECK(pairwise_spearman({a, a}).mean_rho == doctest::Approx(1.0).epsilon(1e-12));

    // rank reversal
    PredictionMatrix rev;
    rev.logits = Tensor({6, 3});
    for (std::size_t i = 0; i < a.logits.size(); ++i) {
        rev.logits.data[i] = -a.logits.data[i];
    }
    CHECK(pairwise_spearman({a, rev}).mean_rho == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("spearman handles ties like the brute-force oracle") {
    const PredictionMatrix a = from_rows({{1, 1, 2}, {3, 3, 3}, {0, 5, 5}});
    const PredictionMatrix b = from_rows({{2, 1, 1}, {4, 4, 2}, {0, 5, 4}});
    const double got = pairwise_spearman({a, b}).mean_rho;
    const double expected = oracle::naive_spearman_pair(a.logits.data, b.logits.data);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("spearman skips constant pairs and reports them") {
    const PredictionMatrix flat = from_rows({{1, 1}, {1, 1}});
    const PredictionMatrix var = from_rows({{1, 2}, {2, 1}});
    const SpearmanResult r = pairwise_spearman({flat, var, var});
    CHECK(r.skipped_pairs == 2);
    CHECK(r.mean_rho == doctest::Approx(1.0));
    CHECK_THROWS_AS(pairwise_spearman({flat, flat}), MetricError);
}

TEST_CASE("ensemble_predict basics") {
    RngStream s{79};
    const PredictionMatrix a = random_preds(5, 3, s);
    const PredictionMatrix ens = ensemble_predict({a, a});
    const auto pa = oracle::softmax_rows(a);
    const auto pe = oracle::softmax_rows(ens);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(pe[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                  doctest::Approx(pa[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                      .epsilon(1e-6));
        }
    }
}

TEST_CASE("two one-hot-opposed models ensemble to a two-class split") {
    const PredictionMatrix a = from_rows({{60, 0, 0}});
    const PredictionMatrix b = from_rows({{0, 60, 0}});
    const PredictionMatrix ens = ensemble_predict({a, b});
    const auto p = oracle::softmax_rows(ens)[0];
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p[2] < 1e-11);
}

TEST_CASE("ensemble_predict matches hand-computed means on a 2x3 fixture") {
    const PredictionMatrix a = from_rows({{1, 0, -1}, {2, 2, 0}});
    const PredictionMatrix b = from_rows({{0, 1, 0}, {0, 1, 2}});
    const PredictionMatrix ens = ensemble_predict({a, b});
    const auto pa = oracle::softmax_rows(a), pb = oracle::softmax_rows(b);
    const auto pe = oracle::softmax_rows(ens);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double expected = 0.5 * (pa[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                                           pb[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            // binary32 log-prob storage bounds the round trip at ~1e-7
            CHECK(pe[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                  doctest::Approx(expected).epsilon(1e-6));
        }
    }
}

TEST_CASE("ensemble delta is zero for identical models and matches enumeration") {
    RngStream s{80};
    const PredictionMatrix a = random_preds(6, 4, s);
    const std::vector<int> labels = {0, 1, 2, 3, 0, 1};
    CHECK(ensemble_delta({a, a, a}, labels, EnsembleMetric::Accuracy) == 0.0);
    // zero in exact arithmetic; binary32 storage of the ensembled
    // log-probabilities leaves ~1e-8 of rounding
    CHECK(std::fabs(ensemble_delta({a, a, a}, labels, EnsembleMetric::CrossEntropy)) < 1e-7);

    std::vector<PredictionMatrix> three;
    for (int i = 0; i < 3; ++i) three.push_back(random_preds(6, 4, s));
    // brute force over the 3 pairs
    double expected = 0.0;
    int pairs = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            const PredictionMatrix ens = ensemble_predict({three[i], three[j]});
            expected += accuracy(ens, labels) -
                        0.5 * (accuracy(three[i], labels) + accuracy(three[j], labels));
            ++pairs;
        }
    }
    expected /= pairs;
    CHECK(ensemble_delta(three, labels, EnsembleMetric::Accuracy) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("linear CKA invariances") {
    RngStream s{81};
    Tensor x({20, 4});
    for (float& v : x.data) v = gaussian(s);
    CHECK(linear_cka(x, x) == doctest::Approx(1.0).epsilon(1e-9));

    // orthogonal transform: Givens rotation pairs
    Tensor q({4, 4});
    const float theta = 0.7f;
    q.at2(0, 0) = std::cos(theta);
    q.at2(0, 1) = -std::sin(theta);
    q.at2(1, 0) = std::sin(theta);
    q.at2(1, 1) = std::cos(theta);
    q.at2(2, 2) = 1.0f;
    q.at2(3, 3) = 1.0f;
    const Tensor xq = kernels::matmul(x, q);
    CHECK(linear_cka(x, xq) == doctest::Approx(1.0).epsilon(1e-6));

    // isotropic scaling + column-constant shift
    Tensor shifted = x;
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 4; ++j) {
            shifted.at2(i, j) = 3.0f * x.at2(i, j) + static_cast<float>(j) * 2.0f;
        }
    }
    CHECK(linear_cka(x, shifted) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linear CKA matches the Gram-route oracle and is symmetric") {
    RngStream s{82};
    Tensor x({8, 3}), y({8, 5});
    for (float& v : x.data) v = gaussian(s);
    for (float& v : y.data) v = gaussian(s);
    const double fwd = linear_cka(x, y);
    CHECK(fwd == doctest::Approx(oracle::naive_cka_gram(x, y)).epsilon(1e-9));
    CHECK(std::fabs(fwd - linear_cka(y, x)) < 1e-12);
}

TEST_CASE("linear CKA rejects zero-variance input") {
    Tensor x({4, 2});  // all zeros -> centered all zeros
    Tensor y({4, 2});
    for (int i = 0; i < 4; ++i) y.at2(i, 0) = static_cast<float>(i);
    CHECK_THROWS_AS(linear_cka(x, y), MetricError);
}

TEST_CASE("nearest-rank percentile matches the oracle") {
    RngStream s{83};
    std::vector<double> values;
    for (int i = 0; i < 37; ++i) values.push_back(gaussian(s));
    for (double p : {0.0, 2.5, 25.0, 50.0, 97.5, 100.0}) {
        CHECK(nearest_rank_percentile(values, p) ==
              doctest::Approx(oracle::naive_percentile(values, p)).epsilon(1e-15));
    }
}

TEST_CASE("report degenerate and deterministic cases") {
    RngStream s{84};
    const PredictionMatrix a = random_preds(12, 3, s);
    const std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
    ReportOptions options;
    options.bootstrap_reps = 200;

    const MetricsReport dup = report("dup", {a, a}, {}, labels, options);
    CHECK(dup.accuracy_sd == 0.0);
    CHECK(dup.ce_sd == 0.0);
    CHECK(dup.pairwise_disagree == 0.0);
    CHECK(dup.pairwise_spearman == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dup.ensemble_delta_acc == 0.0);

    std::vector<PredictionMatrix> runs;
    for (int i = 0; i < 4; ++i) runs.push_back(random_preds(12, 3, s));
    const MetricsReport r1 = report("fixture", runs, {}, labels, options);
    const MetricsReport r2 = report("fixture", runs, {}, labels, options);
    CHECK(r1.accuracy_sd == r2.accuracy_sd);
    CHECK(r1.ce_sd_err == r2.ce_sd_err);
    CHECK(r1.pairwise_disagree == r2.pairwise_disagree);

    // permutation invariance of the pairwise metrics
    std::vector<PredictionMatrix> shuffled = {runs[2], runs[0], runs[3], runs[1]};
    const MetricsReport r3 = report("fixture", shuffled, {}, labels, options);
    CHECK(r3.pairwise_disagree == doctest::Approx(r1.pairwise_disagree).epsilon(1e-12));
    CHECK(r3.pairwise_spearman == doctest::Approx(r1.pairwise_spearman).epsilon(1e-12));
    CHECK(r3.ensemble_delta_acc == doctest::Approx(r1.ensemble_delta_acc).epsilon(1e-12));
}
