#include "eva/kernels.hpp"

#include <algorithm>

namespace eva {

Matrix reshape_input(const Vector& x, int group_dim) {
    if (group_dim < 1) throw ConfigError("reshape: group_dim must be >= 1");
    if (x.size() % group_dim != 0)
        throw DataError("reshape: group_dim does not divide input length");
    const long v = x.size() / group_dim;
    Matrix out(v, group_dim);
    for (long r = 0; r < v; ++r)
        for (int i = 0; i < group_dim; ++i) out(r, i) = x(r * group_dim + i);
    return out;
}

OutputCodebook build_output_codebook(const Matrix& reshaped, const Codebook& cb,
                                     ExecMode mode, OpCounters* counters) {
    const long v = reshaped.rows();
    const int d = static_cast<int>(reshaped.cols());
    if (cb.centroids.rows() != d)
        throw DataError("output codebook: dimension mismatch");
    const long entries = cb.centroids.cols();

    OutputCodebook oc;
    oc.values.resize(v, entries);

    if (mode == ExecMode::Exact) {
        for (long r = 0; r < v; ++r)
            for (long e = 0; e < entries; ++e) {
                double acc = 0.0;
                for (int i = 0; i < d; ++i) {
                    acc += reshaped(r, i) * cb.centroids(i, e);
                    if (counters) {
                        counters->mul += 1;
                        counters->add += 1;
                    }
                }
                oc.values(r, e) = acc;
            }
        return oc;
    }

    // device mode: inputs and centroids quantize to FP16 once, every product runs
    // through the decomposed multiplier, each entry is one aligned reduction
    std::vector<Half> xrow(d), cent(d);
    std::vector<std::vector<Half>> cent_cols(entries, std::vector<Half>(d));
    for (long e = 0; e < entries; ++e)
        for (int i = 0; i < d; ++i)
            cent_cols[e][static_cast<std::size_t>(i)] =
                Half::from_double(cb.centroids(i, e));
    for (long r = 0; r < v; ++r) {
        for (int i = 0; i < d; ++i)
            xrow[static_cast<std::size_t>(i)] = Half::from_double(reshaped(r, i));
        for (long e = 0; e < entries; ++e) {
            const AccumResult res = fp16_dot(xrow, cent_cols[e], counters);
            oc.values(r, e) = res.value.to_double();
        }
    }
    return oc;
}

Vector epilogue_lookup_reduce(const std::vector<OutputCodebook>& outputs,
                              const std::vector<IndexMatrix>& indices,
                              long col_begin, long col_end, ExecMode mode,
                              OpCounters* counters) {
    if (outputs.empty() || outputs.size() != indices.size())
        throw DataError("epilogue: codebook/index count mismatch");
    const long v = outputs.front().values.rows();
    for (std::size_t c = 0; c < outputs.size(); ++c) {
        if (outputs[c].values.rows() != v)
            throw DataError("epilogue: ragged output codebooks");
        if (indices[c].indices.rows() != v)
            throw DataError("epilogue: index row count mismatch");
        if (col_begin < 0 || col_end > indices[c].indices.cols() ||
            col_begin > col_end)
            throw DataError("epilogue: column range out of bounds");
    }

    Vector y(col_end - col_begin);
    for (long j = col_begin; j < col_end; ++j) {
        double acc64 = 0.0;
        float acc32 = 0.0f;
        for (std::size_t c = 0; c < outputs.size(); ++c) {
            const Matrix& vals = outputs[c].values;
            const IndexGrid& grid = indices[c].indices;
            const long entries = vals.cols();
            for (long r = 0; r < v; ++r) {
                const std::uint16_t e = grid(r, j);
                if (e >= entries) throw DataError("epilogue: index out of range");
                if (counters) {
                    counters->lookup += 1;
                    counters->add += 1;
                }
                if (mode == ExecMode::Exact)
                    acc64 += vals(r, e);
                else
                    acc32 += static_cast<float>(vals(r, e));
            }
        }
        y(j - col_begin) = mode == ExecMode::Exact ? acc64 : acc32;
    }
    return y;
}

Vector vq_matvec(const Vector& x, const QuantizedLayer& layer, ExecMode mode,
                 OpCounters* counters) {
    if (x.size() != layer.rows) throw DataError("vq_matvec: input length mismatch");
    if (layer.groups.empty() || layer.index_matrices.empty())
        throw DataError("vq_matvec: untrained layer");

    const Matrix reshaped = reshape_input(x, layer.config.group_dim);
    const int share = layer.config.resolved_share(layer.cols);
    const int c_books = layer.config.num_codebooks;

    Vector y(layer.cols);
    std::vector<OutputCodebook> ocs(c_books);
    for (long g = 0; g < layer.num_groups(); ++g) {
        const long col_begin = g * share;
        const long col_end = std::min(layer.cols, col_begin + share);
        for (int c = 0; c < c_books; ++c)
            ocs[c] = build_output_codebook(reshaped, layer.groups[g][c], mode, counters);
        y.segment(col_begin, col_end - col_begin) = epilogue_lookup_reduce(
            ocs, layer.index_matrices, col_begin, col_end, mode, counters);
    }
    return y;
}

OpCountEstimate op_counts(long rows, long cols, const VQConfig& cfg) {
    cfg.validate();
    if (rows < 1 || cols < 1) throw DataError("op_counts: empty shape");
    if (rows % cfg.group_dim != 0)
        throw DataError("op_counts: group_dim does not divide rows");
    OpCountEstimate est;
    est.gemv_macs = static_cast<std::uint64_t>(rows) * cols;
    est.vq_macs = static_cast<std::uint64_t>(cfg.num_groups(cols)) *
                  cfg.num_codebooks * rows * cfg.entries();
    est.epilogue_adds = static_cast<std::uint64_t>(cfg.num_codebooks) *
                        (rows / cfg.group_dim) * cols;
    est.reduction_factor =
        static_cast<double>(est.gemv_macs) / static_cast<double>(est.vq_macs);
    return est;
}

}  // namespace eva
