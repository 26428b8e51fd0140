#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "eva/kernels.hpp"
#include "eva/random.hpp"
#include "eva/vq.hpp"

using namespace eva;

namespace {

Matrix random_matrix(long rows, long cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(mix_seed(seed, 1));
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = scale * normal_unit(rng);
    return m;
}

Vector random_vector(long n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(mix_seed(seed, 2));
    Vector x(n);
    for (long i = 0; i < n; ++i) x(i) = scale * normal_unit(rng);
    return x;
}

double rel_diff(const Vector& a, const Vector& b) {
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Integer-valued layer built directly, exact in double arithmetic.
QuantizedLayer integer_layer(std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 3));
    QuantizedLayer layer;
    layer.config = VQConfig{4, 3, 2, 5};
    layer.rows = 16;
    layer.cols = 10;
    layer.groups.resize(2, std::vector<Codebook>(2));
    for (auto& set : layer.groups)
        for (auto& cb : set) {
            cb.centroids.resize(4, 8);
            for (long i = 0; i < 4; ++i)
                for (long e = 0; e < 8; ++e)
                    cb.centroids(i, e) =
                        static_cast<double>(uniform_index(rng, 9)) - 4.0;
        }
    layer.index_matrices.resize(2);
    for (auto& im : layer.index_matrices) {
        im.index_bits = 3;
        im.indices.resize(4, 10);
        for (long r = 0; r < 4; ++r)
            for (long j = 0; j < 10; ++j)
                im.indices(r, j) = static_cast<std::uint16_t>(uniform_index(rng, 8));
    }
    layer.validate();
    return layer;
}

}  // namespace

TEST_CASE("reshape splits the input into d-wide rows") {
    Vector x(8);
    for (int i = 0; i < 8; ++i) x(i) = i + 1;
    const Matrix r = reshape_input(x, 4);
    REQUIRE(r.rows() == 2);
    REQUIRE(r.cols() == 4);
    CHECK(r(0, 0) == 1.0);
    CHECK(r(0, 3) == 4.0);
    CHECK(r(1, 0) == 5.0);
    CHECK(r(1, 3) == 8.0);
    CHECK_THROWS_AS(reshape_input(x, 3), DataError);
    CHECK_THROWS_AS(reshape_input(x, 0), ConfigError);
}

TEST_CASE("gemv reference matches the plain ascending-k loop bit-exactly") {
    const Matrix w = random_matrix(8, 3, 31);
    const Vector x = random_vector(8, 32);
    const Vector y = gemv_reference(x, w);
    REQUIRE(y.size() == 3);
    for (long j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (long k = 0; k < 8; ++k) acc += x(k) * w(k, j);
        CHECK(y(j) == acc);
    }
    Vector bad(5);
    CHECK_THROWS_AS(gemv_reference(bad, w), DataError);
}

TEST_CASE("output codebook: hand example and counters") {
    Matrix reshaped(1, 2);
    reshaped << 2.0, 3.0;
    Codebook cb;
    cb.centroids.resize(2, 2);
    cb.centroids << 1.0, 0.0, 0.0, 1.0;

    OpCounters c;
    const OutputCodebook oc =
        build_output_codebook(reshaped, cb, ExecMode::Exact, &c);
    REQUIRE(oc.values.rows() == 1);
    REQUIRE(oc.values.cols() == 2);
    CHECK(oc.values(0, 0) == 2.0);
    CHECK(oc.values(0, 1) == 3.0);
    CHECK(c.mul == 4);  // v * d * entries
    CHECK(c.add == 4);
    CHECK(c.lookup == 0);

    Codebook wrong;
    wrong.centroids.resize(3, 2);
    CHECK_THROWS_AS(build_output_codebook(reshaped, wrong, ExecMode::Exact, nullptr),
                    DataError);
}

TEST_CASE("epilogue: hand example, add-only counters") {
    OutputCodebook oc;
    oc.values.resize(2, 2);
    oc.values << 1.0, 2.0, 3.0, 4.0;
    IndexMatrix im;
    im.index_bits = 1;
    im.indices.resize(2, 3);
    im.indices << 0, 1, 0, 1, 0, 0;

    OpCounters c;
    const Vector y = epilogue_lookup_reduce({oc}, {im}, 0, 3, ExecMode::Exact, &c);
    REQUIRE(y.size() == 3);
    CHECK(y(0) == 5.0);  // oc(0,0) + oc(1,1)
    CHECK(y(1) == 5.0);  // oc(0,1) + oc(1,0)
    CHECK(y(2) == 4.0);  // oc(0,0) + oc(1,0)
    CHECK(c.lookup == 6);
    CHECK(c.add == 6);
    CHECK(c.mul == 0);       // the epilogue never multiplies
    CHECK(c.fp16_mul == 0);
    CHECK(c.int8_mul == 0);

    CHECK_THROWS_AS(epilogue_lookup_reduce({oc}, {im}, 0, 9, ExecMode::Exact, nullptr),
                    DataError);
    CHECK_THROWS_AS(epilogue_lookup_reduce({}, {}, 0, 0, ExecMode::Exact, nullptr),
                    DataError);

    IndexMatrix oor = im;
    oor.indices(0, 0) = 7;  // beyond the 2 stored entries
    CHECK_THROWS_AS(epilogue_lookup_reduce({oc}, {oor}, 0, 3, ExecMode::Exact, nullptr),
                    DataError);
}

TEST_CASE("vq_matvec equals dequantize-then-GEMV across the config grid") {
    int checked = 0;
    for (const int d : {4, 8})
        for (const int n : {2, 4})
            for (const int c : {1, 2, 3})
                for (const int share : {0, 6}) {
                    const VQConfig cfg{d, n, c, share};
                    const Matrix w =
                        random_matrix(32, 12, 100 + checked);
                    const QuantizedLayer layer = train_codebooks(w, cfg, 17);
                    const Vector x = random_vector(32, 200 + checked);
                    const Vector got = vq_matvec(x, layer);
                    const Vector want = gemv_reference(x, dequantize(layer));
                    CHECK(rel_diff(got, want) < 1e-9);
                    ++checked;
                }
    CHECK(checked == 24);
}

TEST_CASE("integer regime is bit-exact") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const QuantizedLayer layer = integer_layer(seed);
        std::mt19937_64 rng(mix_seed(seed, 4));
        Vector x(16);
        for (long i = 0; i < 16; ++i)
            x(i) = static_cast<double>(uniform_index(rng, 17)) - 8.0;
        const Vector got = vq_matvec(x, layer);
        const Vector want = gemv_reference(x, dequantize(layer));
        CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("vq_matvec is homogeneous in the input") {
    const Matrix w = random_matrix(32, 10, 55);
    const QuantizedLayer layer = train_codebooks(w, VQConfig{8, 4, 2, 0}, 7);
    const Vector x = random_vector(32, 56);

    // power-of-two scaling rescales every intermediate exactly
    const Vector direct = vq_matvec((4.0 * x).eval(), layer);
    const Vector scaled = 4.0 * vq_matvec(x, layer);
    CHECK((direct - scaled).cwiseAbs().maxCoeff() == 0.0);

    const Vector g = vq_matvec((1.7 * x).eval(), layer);
    CHECK(rel_diff(g, (1.7 * vq_matvec(x, layer)).eval()) < 1e-12);
}

TEST_CASE("op_counts: the W1 flagship shape reduces multiplies 16x") {
    const OpCountEstimate est = op_counts(4096, 4096, VQConfig{8, 8, 1, 0});
    CHECK(est.gemv_macs == 16777216);
    CHECK(est.vq_macs == 1048576);  // G*C*K*2^n = 1*1*4096*256
    CHECK(est.epilogue_adds == 2097152);
    CHECK(est.reduction_factor == 16.0);
}

TEST_CASE("op_counts: n=12, C=2 doubles the GEMV work") {
    const OpCountEstimate est = op_counts(4096, 4096, VQConfig{8, 12, 2, 0});
    CHECK(est.vq_macs == 2 * est.gemv_macs);
    CHECK(est.reduction_factor == 0.5);

    CHECK_THROWS_AS(op_counts(30, 8, VQConfig{8, 4, 1, 0}), DataError);
}

TEST_CASE("measured counters match the analytic op counts") {
    const Matrix w = random_matrix(32, 12, 60);
    const VQConfig cfg{4, 3, 2, 6};
    const QuantizedLayer layer = train_codebooks(w, cfg, 8);
    const Vector x = random_vector(32, 61);

    OpCounters c;
    vq_matvec(x, layer, ExecMode::Exact, &c);
    const OpCountEstimate est = op_counts(32, 12, cfg);
    CHECK(c.mul == est.vq_macs);
    CHECK(c.lookup == est.epilogue_adds);
    CHECK(c.add == est.vq_macs + est.epilogue_adds);
    CHECK(c.fp16_mul == 0);
}

TEST_CASE("device mode tracks the exact path at FP16 fidelity") {
    // small magnitudes keep the emulated pipeline away from overflow/flush
    const Matrix w = random_matrix(32, 8, 70, 0.125);
    const VQConfig cfg{8, 4, 2, 0};
    const QuantizedLayer layer = train_codebooks(w, cfg, 11);
    const Vector x = random_vector(32, 71, 0.25);

    OpCounters c;
    const Vector device = vq_matvec(x, layer, ExecMode::DeviceFp16, &c);
    const Vector exact = vq_matvec(x, layer, ExecMode::Exact);
    CHECK(exact.cwiseAbs().maxCoeff() > 0.0);
    CHECK(rel_diff(device, exact) < 0.05);

    const OpCountEstimate est = op_counts(32, 8, cfg);
    CHECK(c.fp16_mul == est.vq_macs);       // every product runs on the FP16 PE
    CHECK(c.int8_mul == 4 * est.vq_macs);   // four 8-bit multipliers per product
    CHECK(c.lookup == est.epilogue_adds);
}

TEST_CASE("vq_matvec input validation") {
    const Matrix w = random_matrix(16, 4, 80);
    const QuantizedLayer layer = train_codebooks(w, VQConfig{4, 2, 1, 0}, 1);
    Vector short_x(8);
    CHECK_THROWS_AS(vq_matvec(short_x, layer), DataError);
    QuantizedLayer empty;
    empty.rows = 8;
    CHECK_THROWS_AS(vq_matvec(random_vector(8, 81), empty), DataError);
}
