#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

#include "varlab/errors.hpp"

namespace varlab {

enum class UlpDirection { Up, Down };

/// The adjacent binary32 value in the given direction (Up = toward +inf,
/// Down = toward -inf). One-ULP step by integer increment of the bit
/// pattern, crossing zero and subnormals per IEEE-754 total order.
/// Throws RangeError on non-finite input or when stepping past max-finite.
inline float next_representable(float x, UlpDirection dir) {
    if (!std::isfinite(x)) {
        throw RangeError("next_representable: input not finite");
    }
    std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
    const bool up = (dir == UlpDirection::Up);
    const bool negative = (bits & 0x80000000u) != 0;
    if (bits == 0x00000000u || bits == 0x80000000u) {
        // +-0: both act as zero; step lands on the smallest subnormal of the
        // target sign.
        return up ? std::bit_cast<float>(0x00000001u) : std::bit_cast<float>(0x80000001u);
    }
    // Moving away from zero means incrementing the magnitude bits.
    const bool away_from_zero = (up != negative);
    if (away_from_zero) {
        if ((bits & 0x7FFFFFFFu) == 0x7F7FFFFFu) {
            throw RangeError("next_representable: step past max finite");
        }
        ++bits;
    } else {
        --bits;
    }
    return std::bit_cast<float>(bits);
}

/// |one-ULP step| at x's magnitude, as a binary64 value.
inline double ulp_magnitude(float x, UlpDirection dir) {
    const double stepped = static_cast<double>(next_representable(x, dir));
    return std::fabs(stepped - static_cast<double>(x));
}

}  // namespace varlab
