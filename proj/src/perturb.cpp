#include "varlab/perturb.hpp"

#include <bit>
#include <cmath>

#include "varlab/errors.hpp"

namespace varlab {

std::uint32_t BitFlipDescriptor::old_bits() const { return std::bit_cast<std::uint32_t>(old_value); }
std::uint32_t BitFlipDescriptor::new_bits() const { return std::bit_cast<std::uint32_t>(new_value); }

std::pair<Params, BitFlipDescriptor> apply_random_bit_flip(const ModelSpec& spec, Params params,
                                                           RngStream stream) {
    const std::string layer = first_layer_weight_name(spec);
    Tensor& weights = params.find(layer);
    if (weights.size() == 0) {
        throw ValidationError("bit flip: first layer is empty");
    }
    const std::uint64_t index = bounded_uint(stream, weights.size());
    const UlpDirection dir =
        (rng_next(stream) >> 63) ? UlpDirection::Up : UlpDirection::Down;

    BitFlipDescriptor desc;
    desc.layer = layer;
    desc.flat_index = static_cast<std::int64_t>(index);
    desc.direction = dir;
    desc.old_value = weights.data[index];
    desc.new_value = next_representable(desc.old_value, dir);
    weights.data[index] = desc.new_value;
    return {std::move(params), desc};
}

double condition_number(double metric_base, double metric_perturbed, double delta_x) {
    if (!(delta_x > 0.0)) {
        throw RangeError("condition_number: delta_x must be positive");
    }
    return std::fabs(metric_perturbed - metric_base) / delta_x;
}

}  // namespace varlab
