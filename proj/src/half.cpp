#include "eva/half.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

namespace eva {

namespace {

Half make_half(bool neg, int exponent, std::uint32_t significand) {
    // significand holds 11 bits (implicit one included), exponent is unbiased
    const std::uint16_t bits = static_cast<std::uint16_t>(
        (neg ? 0x8000u : 0u) | (static_cast<std::uint32_t>(exponent + 15) << 10) |
        (significand & 0x3ffu));
    return Half::from_bits(bits);
}

Half max_normal(bool neg) { return make_half(neg, 15, 0x7ff); }

}  // namespace

Half Half::from_double(double v) {
    if (!std::isfinite(v)) throw DataError("half: non-finite value");
    const bool neg = std::signbit(v);
    double mag = std::fabs(v);
    if (mag < kHalfMinNormal) return Half(0);  // flush, including true zero
    if (mag >= 65520.0) throw DataError("half: magnitude exceeds max normal");

    int e2 = 0;
    const double m = std::frexp(mag, &e2);  // mag = m * 2^e2, m in [0.5, 1)
    int exponent = e2 - 1;                  // mag = (2m) * 2^exponent, 2m in [1, 2)
    const double scaled = std::ldexp(m, 11);  // 11-bit significand + fraction, exact
    auto si = static_cast<std::uint32_t>(scaled);
    const double frac = scaled - si;
    if (frac > 0.5 || (frac == 0.5 && (si & 1u))) si += 1;
    if (si == 0x800u) {
        si >>= 1;
        exponent += 1;
    }
    if (exponent > 15) throw DataError("half: magnitude exceeds max normal");
    return make_half(neg, exponent, si);
}

Half Half::from_bits(std::uint16_t bits) {
    const int exp_field = (bits >> 10) & 0x1f;
    if (exp_field == 0x1f) throw DataError("half: inf/NaN encoding rejected");
    if (exp_field == 0) return Half(0);  // subnormals and zeros flush to +0
    return Half(bits);
}

double Half::to_double() const {
    if (is_zero()) return 0.0;
    const double sig = static_cast<double>(0x400 | mantissa_field());
    const double mag = std::ldexp(sig, unbiased_exponent() - 10);
    return sign() ? -mag : mag;
}

AlignedProduct fp16_mul_decomposed(Half a, Half b, OpCounters* counters) {
    if (counters) {
        counters->fp16_mul += 1;
        counters->int8_mul += 4;
        counters->mul += 1;
    }
    if (a.is_zero() || b.is_zero()) return {0, 0};

    const std::uint32_t sa = 0x400u | static_cast<std::uint32_t>(a.mantissa_field());
    const std::uint32_t sb = 0x400u | static_cast<std::uint32_t>(b.mantissa_field());
    const std::uint32_t ah = sa >> 5, al = sa & 0x1fu;  // 6-bit / 5-bit chunks
    const std::uint32_t bh = sb >> 5, bl = sb & 0x1fu;
    const std::uint32_t prod =
        (ah * bh << 10) + (ah * bl << 5) + (al * bh << 5) + (al * bl);

    // biased exponents add in a 6-bit adder (fields <= 30, sum <= 60, never wraps)
    const std::uint32_t esum =
        (static_cast<std::uint32_t>(a.exponent_field()) +
         static_cast<std::uint32_t>(b.exponent_field())) & 0x3fu;
    const int exponent = static_cast<int>(esum) - 30;

    const bool neg = a.sign() != b.sign();
    return {neg ? -static_cast<std::int32_t>(prod) : static_cast<std::int32_t>(prod),
            exponent};
}

AccumResult align_accumulate(std::span<const AlignedProduct> products,
                             OpCounters* counters) {
    // Guard bits below the aligned point so truncation error stays well under the
    // final rounding step. 22-bit significands + 6 guard bits + sign leave room for
    // eight full-magnitude terms in the 32-bit accumulator.
    constexpr int kGuard = 6;
    constexpr int kShiftCap = 31;

    int max_exp = std::numeric_limits<int>::min();
    for (const auto& p : products)
        if (p.significand != 0) max_exp = std::max(max_exp, p.exponent);
    if (max_exp == std::numeric_limits<int>::min()) return {Half{}, false};

    std::int64_t acc = 0;
    bool sticky = false;
    bool saturated = false;
    for (const auto& p : products) {
        if (p.significand == 0) continue;
        if (counters) counters->add += 1;
        const int shift = max_exp - p.exponent;
        if (shift > kShiftCap) {
            sticky = true;
            continue;
        }
        std::uint64_t mag = static_cast<std::uint64_t>(std::abs(p.significand)) << kGuard;
        if (shift > 0) {
            if ((mag & ((1ull << shift) - 1)) != 0) sticky = true;
            mag >>= shift;
        }
        acc += p.significand < 0 ? -static_cast<std::int64_t>(mag)
                                 : static_cast<std::int64_t>(mag);
        if (acc > std::numeric_limits<std::int32_t>::max() ||
            acc < std::numeric_limits<std::int32_t>::min()) {
            saturated = true;
            acc = acc > 0 ? std::numeric_limits<std::int32_t>::max()
                          : std::numeric_limits<std::int32_t>::min();
        }
    }

    if (saturated) return {max_normal(acc < 0), true};
    if (acc == 0) return {Half{}, false};

    const bool neg = acc < 0;
    std::uint64_t mag = static_cast<std::uint64_t>(neg ? -acc : acc);
    const int base = max_exp - 20 - kGuard;  // weight of the accumulator lsb
    const int msb = std::bit_width(mag) - 1;
    int exponent = base + msb;

    std::uint32_t si;
    const int drop = msb - 10;
    if (drop <= 0) {
        si = static_cast<std::uint32_t>(mag << -drop);
    } else {
        si = static_cast<std::uint32_t>(mag >> drop);
        const std::uint64_t rem = mag & ((1ull << drop) - 1);
        const std::uint64_t half = 1ull << (drop - 1);
        if (rem > half || (rem == half && (sticky || (si & 1u)))) {
            si += 1;
            if (si == 0x800u) {
                si >>= 1;
                exponent += 1;
            }
        }
    }

    if (exponent > 15) return {max_normal(neg), true};
    if (exponent < -14) return {Half{}, false};  // result underflows, flush
    return {make_half(neg, exponent, si), false};
}

AccumResult fp16_dot(std::span<const Half> a, std::span<const Half> b,
                     OpCounters* counters) {
    if (a.size() != b.size()) throw DataError("fp16_dot: length mismatch");
    std::vector<AlignedProduct> terms(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        terms[i] = fp16_mul_decomposed(a[i], b[i], counters);
    return align_accumulate(terms, counters);
}

ArrayMode reconfigure(PeMode mode) {
    if (mode == PeMode::Int8) return {mode, 32, 32};
    return {mode, 32, 8};
}

}  // namespace eva
