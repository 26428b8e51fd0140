#pragma once

#include <cstdint>
#include <span>

#include "eva/counters.hpp"
#include "eva/error.hpp"

namespace eva {

// IEEE binary16 value (1 sign / 5 exponent / 10 mantissa bits) as the PE datapath
// sees it: subnormal inputs flush to +0, infinities and NaNs are rejected outright
// because the array has no path for them.
class Half {
public:
    Half() = default;

    static Half from_double(double v);           // round to nearest even, flush-to-zero
    static Half from_bits(std::uint16_t bits);   // validates encodings, flushes subnormals

    double to_double() const;

    std::uint16_t bits() const { return bits_; }
    bool sign() const { return (bits_ >> 15) != 0; }
    int exponent_field() const { return (bits_ >> 10) & 0x1f; }
    int mantissa_field() const { return bits_ & 0x3ff; }
    int unbiased_exponent() const { return exponent_field() - 15; }
    bool is_zero() const { return (bits_ & 0x7fff) == 0; }

    friend bool operator==(Half a, Half b) { return a.bits_ == b.bits_; }
    friend bool operator!=(Half a, Half b) { return a.bits_ != b.bits_; }

private:
    explicit Half(std::uint16_t bits) : bits_(bits) {}
    std::uint16_t bits_ = 0;
};

inline constexpr double kHalfMaxNormal = 65504.0;
inline constexpr double kHalfMinNormal = 6.103515625e-05;  // 2^-14

// One multiplier output, ready for alignment: value = significand * 2^(exponent - 20).
// significand is the signed 22-bit product of two 11-bit significands, so
// |significand| < 2^22; exponent is unbiased.
struct AlignedProduct {
    std::int32_t significand = 0;
    int exponent = 0;
};

struct AccumResult {
    Half value;
    bool overflow = false;  // accumulator saturated or the result exceeded max normal
};

// Multiply two halves the way one FP16 PE does it: the 11-bit significands split into
// a 6-bit high and a 5-bit low chunk, four 8-bit-input partial products recombine at
// shifts 0/5/5/10, biased exponents go through a 6-bit adder, signs through an XOR.
// The significand product is exact. Counts 4 INT8 multiplies per call.
AlignedProduct fp16_mul_decomposed(Half a, Half b, OpCounters* counters = nullptr);

// Adder-tree accumulation: every product is right-shifted to the largest exponent
// (shifted-out bits OR into a sticky bit; shifts past 31 collapse to sticky only),
// summed in a 32-bit signed saturating accumulator, and rounded once (nearest even)
// at the final conversion back to Half. Overflow saturates to max normal and flags.
AccumResult align_accumulate(std::span<const AlignedProduct> products,
                             OpCounters* counters = nullptr);

// Dot product on the emulated datapath: decomposed multiplies, one aligned reduction.
AccumResult fp16_dot(std::span<const Half> a, std::span<const Half> b,
                     OpCounters* counters = nullptr);

enum class PeMode { Int8, Fp16 };

// The multiplier pool is fixed at 1024 8-bit multipliers; it runs as a 32x32 INT8
// array or as a 32x8 FP16 array (each FP16 PE consumes four 8-bit multipliers).
struct ArrayMode {
    PeMode mode;
    int rows;
    int cols;
    int multiplies_per_cycle() const { return rows * cols; }
};

ArrayMode reconfigure(PeMode mode);

}  // namespace eva
