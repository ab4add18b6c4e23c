#pragma once

#include <cstdint>
#include <string>

#include "varlab/models.hpp"
#include "varlab/rng.hpp"
#include "varlab/ulp.hpp"

namespace varlab {

/// Exact record of a one-ULP initial-parameter change.
struct BitFlipDescriptor {
    std::string layer;
    std::int64_t flat_index = -1;
    UlpDirection direction = UlpDirection::Up;
    float old_value = 0.0f;
    float new_value = 0.0f;

    std::uint32_t old_bits() const;
    std::uint32_t new_bits() const;
};

/// Replace one uniformly chosen weight of the first learnable layer
/// (biases excluded) with its adjacent representable value; direction is a
/// second uniform draw (draw order: index, then direction). All other
/// values are bitwise untouched. A selected weight of exactly 0.0 steps
/// into the signed smallest subnormal.
std::pair<Params, BitFlipDescriptor> apply_random_bit_flip(const ModelSpec& spec, Params params,
                                                           RngStream stream);

/// Empirical condition number |delta f| / |delta x| of the end-to-end
/// training map. Accuracy in percentage points, cross-entropy in nats.
double condition_number(double metric_base, double metric_perturbed, double delta_x);

}  // namespace varlab
