#include "eva/vq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eva/random.hpp"

namespace eva {

void VQConfig::validate() const {
    if (group_dim < 1) throw ConfigError("vq: group_dim must be >= 1");
    if (index_bits < 1 || index_bits > 16)
        throw ConfigError("vq: index_bits must be in [1, 16]");
    if (num_codebooks < 1) throw ConfigError("vq: num_codebooks must be >= 1");
    if (channels_per_group < 0)
        throw ConfigError("vq: channels_per_group must be >= 0");
}

double effective_bitwidth(const VQConfig& cfg) {
    return static_cast<double>(cfg.num_codebooks) * cfg.index_bits / cfg.group_dim;
}

void QuantizedLayer::validate() const {
    config.validate();
    if (rows < 1 || cols < 1) throw DataError("layer: empty shape");
    if (rows % config.group_dim != 0)
        throw DataError("layer: group_dim does not divide rows");
    const long expected_groups = config.num_groups(cols);
    if (num_groups() != expected_groups) throw DataError("layer: group count mismatch");
    const long v = vectors_per_column();
    for (const auto& set : groups) {
        if (static_cast<int>(set.size()) != config.num_codebooks)
            throw DataError("layer: codebook count mismatch");
        for (const auto& cb : set)
            if (cb.centroids.rows() != config.group_dim ||
                cb.centroids.cols() != config.entries())
                throw DataError("layer: codebook shape mismatch");
    }
    if (static_cast<int>(index_matrices.size()) != config.num_codebooks)
        throw DataError("layer: index matrix count mismatch");
    for (const auto& im : index_matrices) {
        if (im.indices.rows() != v || im.indices.cols() != cols)
            throw DataError("layer: index matrix shape mismatch");
        if (im.index_bits != config.index_bits)
            throw DataError("layer: index width mismatch");
        const auto limit = static_cast<std::uint16_t>(config.entries() - 1);
        for (long j = 0; j < im.indices.cols(); ++j)
            for (long r = 0; r < im.indices.rows(); ++r)
                if (im.indices(r, j) > limit)
                    throw DataError("layer: index out of range");
    }
}

KMeansResult fit_kmeans(const Matrix& samples, int k, std::mt19937_64& rng,
                        int max_iters, double rel_tol) {
    const long count = samples.rows();
    const long dim = samples.cols();
    if (count < 1) throw DataError("kmeans: no samples");
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");

    Matrix centroids(k, dim);  // row per centroid while fitting
    Vector min_d2(count);

    // k-means++: first center uniform, the rest D^2-weighted over remaining mass
    const long first = static_cast<long>(uniform_index(rng, count));
    centroids.row(0) = samples.row(first);
    min_d2 = (samples.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = min_d2.sum();
        long pick;
        if (total > 0.0) {
            const double target = uniform_unit(rng) * total;
            double running = 0.0;
            pick = count - 1;
            for (long s = 0; s < count; ++s) {
                running += min_d2[s];
                if (running >= target) {
                    pick = s;
                    break;
                }
            }
        } else {
            pick = static_cast<long>(uniform_index(rng, count));
        }
        centroids.row(c) = samples.row(pick);
        min_d2 = min_d2.cwiseMin(
            (samples.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assignment(count, 0);
    Vector sample_sq = samples.rowwise().squaredNorm();

    const auto assign = [&]() -> double {
        // argmin_c |s - c|^2 via |s|^2 - 2 s.c + |c|^2; lowest index wins ties
        const Matrix dots = samples * centroids.transpose();  // count x k
        const Vector cent_sq = centroids.rowwise().squaredNorm();
        double sse = 0.0;
        for (long s = 0; s < count; ++s) {
            int best = 0;
            double best_cost = cent_sq[0] - 2.0 * dots(s, 0);
            for (int c = 1; c < k; ++c) {
                const double cost = cent_sq[c] - 2.0 * dots(s, c);
                if (cost < best_cost) {
                    best_cost = cost;
                    best = c;
                }
            }
            assignment[s] = best;
            min_d2[s] = std::max(0.0, sample_sq[s] + best_cost);
            sse += min_d2[s];
        }
        return sse;
    };

    const auto update = [&]() {
        Matrix sums = Matrix::Zero(k, dim);
        std::vector<long> sizes(k, 0);
        for (long s = 0; s < count; ++s) {
            sums.row(assignment[s]) += samples.row(s);
            sizes[assignment[s]] += 1;
        }
        for (int c = 0; c < k; ++c)
            if (sizes[c] > 0) centroids.row(c) = sums.row(c) / sizes[c];
        // empty clusters grab the farthest sample (ascending cluster order,
        // lowest sample index wins ties) so they re-enter the next assignment
        for (int c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            long far = 0;
            double far_d2 = -1.0;
            for (long s = 0; s < count; ++s)
                if (min_d2[s] > far_d2) {
                    far_d2 = min_d2[s];
                    far = s;
                }
            centroids.row(c) = samples.row(far);
            min_d2[far] = 0.0;
        }
    };

    KMeansResult result;
    double prev = assign();
    for (int iter = 1; iter <= max_iters; ++iter) {
        update();
        const double cur = assign();
        result.iterations = iter;
        result.sse = cur;
        if (cur == 0.0 || prev - cur <= rel_tol * prev) break;
        prev = cur;
    }
    result.centroids = centroids.transpose();
    result.assignment = std::move(assignment);
    return result;
}

QuantizedLayer train_codebooks(const Matrix& weights, const VQConfig& cfg,
                               std::uint64_t seed, TrainReport* report) {
    cfg.validate();
    const long rows = weights.rows();
    const long cols = weights.cols();
    if (rows < 1 || cols < 1) throw DataError("train: empty weight matrix");
    if (rows % cfg.group_dim != 0)
        throw DataError("train: group_dim does not divide weight rows");

    const int d = cfg.group_dim;
    const long v = rows / d;
    const int share = cfg.resolved_share(cols);
    const long num_groups = cfg.num_groups(cols);

    QuantizedLayer layer;
    layer.config = cfg;
    layer.config.channels_per_group = share;
    layer.rows = rows;
    layer.cols = cols;
    layer.groups.resize(num_groups);
    layer.index_matrices.assign(
        cfg.num_codebooks, IndexMatrix{IndexGrid::Zero(v, cols), cfg.index_bits});

    std::vector<double> stage_sse(cfg.num_codebooks, 0.0);

    for (long g = 0; g < num_groups; ++g) {
        const long col_begin = g * share;
        const long col_end = std::min(cols, col_begin + share);
        const long group_cols = col_end - col_begin;
        const long count = v * group_cols;

        Matrix residual(count, d);
        for (long j = 0; j < group_cols; ++j)
            for (long r = 0; r < v; ++r)
                residual.row(j * v + r) =
                    weights.block(r * d, col_begin + j, d, 1).transpose();

        layer.groups[g].resize(cfg.num_codebooks);
        for (int c = 0; c < cfg.num_codebooks; ++c) {
            std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(g) *
                                                   cfg.num_codebooks + c));
            KMeansResult fit = fit_kmeans(residual, cfg.entries(), rng);
            layer.groups[g][c].centroids = fit.centroids;

            IndexGrid& grid = layer.index_matrices[c].indices;
            for (long j = 0; j < group_cols; ++j)
                for (long r = 0; r < v; ++r) {
                    const int a = fit.assignment[j * v + r];
                    grid(r, col_begin + j) = static_cast<std::uint16_t>(a);
                    residual.row(j * v + r) -= fit.centroids.col(a).transpose();
                }
            stage_sse[c] += residual.squaredNorm();
        }
    }

    if (report) {
        report->stage_mse.resize(cfg.num_codebooks);
        const double elems = static_cast<double>(rows) * cols;
        for (int c = 0; c < cfg.num_codebooks; ++c)
            report->stage_mse[c] = stage_sse[c] / elems;
        report->final_mse = report->stage_mse.back();
    }
    return layer;
}

Matrix dequantize(const QuantizedLayer& layer) {
    layer.validate();
    const int d = layer.config.group_dim;
    const long v = layer.vectors_per_column();
    const int share = layer.config.resolved_share(layer.cols);

    Matrix out = Matrix::Zero(layer.rows, layer.cols);
    for (long j = 0; j < layer.cols; ++j) {
        const long g = j / share;
        for (int c = 0; c < layer.config.num_codebooks; ++c) {
            const Matrix& centroids = layer.groups[g][c].centroids;
            const IndexGrid& grid = layer.index_matrices[c].indices;
            for (long r = 0; r < v; ++r)
                out.block(r * d, j, d, 1) += centroids.col(grid(r, j));
        }
    }
    return out;
}

double expected_utilization(int index_bits, long cols) {
    if (index_bits < 1 || index_bits > 16)
        throw ConfigError("utilization: index_bits must be in [1, 16]");
    if (cols < 0) throw ConfigError("utilization: negative column count");
    const double miss = 1.0 - std::ldexp(1.0, -index_bits);
    return 1.0 - std::pow(miss, static_cast<double>(cols));
}

double empirical_utilization(const IndexMatrix& im) {
    const long v = im.indices.rows();
    const long cols = im.indices.cols();
    if (v < 1 || cols < 1) throw DataError("utilization: empty index matrix");
    const int entries = 1 << im.index_bits;

    std::vector<std::uint32_t> stamp(entries, 0);
    double total = 0.0;
    for (long r = 0; r < v; ++r) {
        const auto mark = static_cast<std::uint32_t>(r + 1);
        long distinct = 0;
        for (long j = 0; j < cols; ++j) {
            const std::uint16_t e = im.indices(r, j);
            if (e >= entries) throw DataError("utilization: index out of range");
            if (stamp[e] != mark) {
                stamp[e] = mark;
                ++distinct;
            }
        }
        total += static_cast<double>(distinct) / entries;
    }
    return total / static_cast<double>(v);
}

}  // namespace eva
