#include "varlab/predictions.hpp"

#include <algorithm>
#include <cmath>

namespace varlab {

std::vector<double> softmax_row(const float* row, int n) {
    double m = row[0];
    for (int j = 1; j < n; ++j) m = std::max(m, static_cast<double>(row[j]));
    std::vector<double> p(n);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        p[j] = std::exp(static_cast<double>(row[j]) - m);
        sum += p[j];
    }
    for (int j = 0; j < n; ++j) p[j] /= sum;
    return p;
}

int argmax_row(const float* row, int n) {
    int best = 0;
    for (int j = 1; j < n; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

}  // namespace varlab
