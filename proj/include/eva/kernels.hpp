#pragma once

#include <Eigen/Dense>
#include <vector>

#include "eva/counters.hpp"
#include "eva/half.hpp"
#include "eva/vq.hpp"

namespace eva {

// Exact: FP64 arithmetic end to end. DeviceFp16: every multiply runs through the
// decomposed FP16 PE datapath and the epilogue accumulates in FP32.
enum class ExecMode { Exact, DeviceFp16 };

// Length-K input viewed as (K/d) rows of d contiguous elements.
Matrix reshape_input(const Vector& x, int group_dim);

// y(j) = sum_k x(k) W(k, j); accumulation order is ascending k, in 64-bit reals.
// The oracle in the tests mirrors exactly this order.
template <typename DerivedX, typename DerivedW>
Vector gemv_reference(const Eigen::MatrixBase<DerivedX>& x,
                      const Eigen::MatrixBase<DerivedW>& W) {
    if (x.size() != W.rows()) throw DataError("gemv: shape mismatch");
    Vector y(W.cols());
    for (long j = 0; j < W.cols(); ++j) {
        double acc = 0.0;
        for (long k = 0; k < W.rows(); ++k)
            acc += static_cast<double>(x(k)) * static_cast<double>(W(k, j));
        y(j) = acc;
    }
    return y;
}

// Per-input product table O = X B: O(r, e) is the dot of input block r with
// codebook entry e. After this, every output element is a chain of lookups + adds.
// In device mode entries hold Half-exact values.
struct OutputCodebook {
    Matrix values;  // (K/d) x 2^n
};

OutputCodebook build_output_codebook(const Matrix& reshaped, const Codebook& cb,
                                     ExecMode mode = ExecMode::Exact,
                                     OpCounters* counters = nullptr);

// y(j) = sum_c sum_r O_c(r, I_c(r, j)) over columns [col_begin, col_end):
// codebooks outermost, rows innermost. Pure lookup-and-add; the multiply counter
// never moves here.
Vector epilogue_lookup_reduce(const std::vector<OutputCodebook>& outputs,
                              const std::vector<IndexMatrix>& indices,
                              long col_begin, long col_end,
                              ExecMode mode = ExecMode::Exact,
                              OpCounters* counters = nullptr);

// Full reformulated matvec: reshape, build per-group output codebooks, reduce.
// Groups the K-sum into K/d blocks of d, same as the hardware.
Vector vq_matvec(const Vector& x, const QuantizedLayer& layer,
                 ExecMode mode = ExecMode::Exact, OpCounters* counters = nullptr);

struct OpCountEstimate {
    std::uint64_t gemv_macs = 0;     // K*N
    std::uint64_t vq_macs = 0;       // G*C*K*2^n, the codebook-product work
    std::uint64_t epilogue_adds = 0; // C*(K/d)*N
    double reduction_factor = 0.0;   // gemv_macs / vq_macs
};

OpCountEstimate op_counts(long rows, long cols, const VQConfig& cfg);

}  // namespace eva
