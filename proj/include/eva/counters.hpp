#pragma once

#include <cstdint>

namespace eva {

// Operation-counting instrumentation. Kernels and the FP16 emulation accept an
// optional pointer and bump these as they go; a null pointer disables counting.
struct OpCounters {
    std::uint64_t mul = 0;        // scalar multiplies (any precision)
    std::uint64_t add = 0;        // scalar adds / accumulations
    std::uint64_t lookup = 0;     // table reads by index
    std::uint64_t fp16_mul = 0;   // emulated FP16 multiplies
    std::uint64_t int8_mul = 0;   // INT8 partial-product multiplies inside the emulation

    void reset() { *this = OpCounters{}; }
};

}  // namespace eva
