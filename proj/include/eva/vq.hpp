#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "eva/error.hpp"

namespace eva {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexGrid = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic>;

// Additive vector-quantization geometry: columns of a K x N weight matrix are cut
// into K/d groups of d consecutive rows; each d-vector is coded by one index per
// codebook stage, and every span of channels_per_group columns shares a codebook set.
struct VQConfig {
    int group_dim = 8;           // rows per coded vector (d)
    int index_bits = 8;          // log2 codebook entries (n)
    int num_codebooks = 2;       // additive refinement stages (C)
    int channels_per_group = 0;  // columns per shared codebook set; 0 means all columns

    int entries() const { return 1 << index_bits; }
    int resolved_share(long cols) const {
        return channels_per_group > 0 ? channels_per_group : static_cast<int>(cols);
    }
    long num_groups(long cols) const {
        const int share = resolved_share(cols);
        return (cols + share - 1) / share;
    }
    void validate() const;  // throws ConfigError on nonsense combinations
};

// Compressed bits per weight element: C*n/d.
double effective_bitwidth(const VQConfig& cfg);

struct Codebook {
    Matrix centroids;  // group_dim x entries
};

struct IndexMatrix {
    IndexGrid indices;  // (K/d) x N
    int index_bits = 8;
};

struct QuantizedLayer {
    VQConfig config;
    long rows = 0;  // K
    long cols = 0;  // N
    std::vector<std::vector<Codebook>> groups;  // [group][codebook]
    std::vector<IndexMatrix> index_matrices;    // [codebook], each covering all columns

    long vectors_per_column() const { return rows / config.group_dim; }
    long num_groups() const { return static_cast<long>(groups.size()); }
    void validate() const;  // throws DataError on structural damage
};

struct TrainReport {
    std::vector<double> stage_mse;  // element MSE of the residual after each stage
    double final_mse = 0.0;
};

// Residual k-means training: each codebook stage fits the residual left by the
// previous stages, per column group. Deterministic for a fixed (weights, cfg, seed).
QuantizedLayer train_codebooks(const Matrix& weights, const VQConfig& cfg,
                               std::uint64_t seed, TrainReport* report = nullptr);

// Reconstruct the full weight matrix by summing looked-up centroids across stages.
Matrix dequantize(const QuantizedLayer& layer);

// Expected fraction of codebook entries referenced by at least one of `cols`
// uniform-random indices: 1 - (1 - 2^-n)^cols.
double expected_utilization(int index_bits, long cols);

// Fraction of entries referenced per index row, averaged over rows.
double empirical_utilization(const IndexMatrix& im);

// Plain Lloyd with k-means++ seeding. Samples are rows. Runs at least one mean
// update, at most max_iters, stops early when the relative SSE improvement falls
// below rel_tol. Empty clusters re-seed to the farthest sample.
struct KMeansResult {
    Matrix centroids;  // dim x k
    std::vector<int> assignment;
    double sse = 0.0;
    int iterations = 0;
};

KMeansResult fit_kmeans(const Matrix& samples, int k, std::mt19937_64& rng,
                        int max_iters = 50, double rel_tol = 1e-6);

}  // namespace eva
