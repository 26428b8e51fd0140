#include "eva/vq_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace eva {

static_assert(std::endian::native == std::endian::little,
              "container readers assume a little-endian host");

namespace {

constexpr std::uint32_t kLayerVersion = 1;
constexpr std::uint32_t kWeightsVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in, const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError(std::string("container: truncated reading ") + what);
    return v;
}

void expect_eof(std::ifstream& in, const std::string& path) {
    char extra;
    in.read(&extra, 1);
    if (!in.eof()) throw DataError("container: trailing bytes in " + path);
}

}  // namespace

void save_layer(const QuantizedLayer& layer, const std::string& path) {
    layer.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("container: cannot open for write: " + path);

    out.write("EVAQ", 4);
    write_u32(out, kLayerVersion);
    write_u32(out, static_cast<std::uint32_t>(layer.rows));
    write_u32(out, static_cast<std::uint32_t>(layer.cols));
    write_u32(out, static_cast<std::uint32_t>(layer.config.group_dim));
    write_u32(out, static_cast<std::uint32_t>(layer.config.index_bits));
    write_u32(out, static_cast<std::uint32_t>(layer.config.num_codebooks));
    write_u32(out, static_cast<std::uint32_t>(layer.config.resolved_share(layer.cols)));

    std::vector<float> fbuf;
    for (const auto& set : layer.groups)
        for (const auto& cb : set) {
            fbuf.resize(static_cast<std::size_t>(cb.centroids.size()));
            std::size_t i = 0;
            for (long r = 0; r < cb.centroids.rows(); ++r)
                for (long c = 0; c < cb.centroids.cols(); ++c)
                    fbuf[i++] = static_cast<float>(cb.centroids(r, c));
            out.write(reinterpret_cast<const char*>(fbuf.data()),
                      static_cast<std::streamsize>(fbuf.size() * sizeof(float)));
        }

    std::vector<std::uint16_t> ibuf;
    for (const auto& im : layer.index_matrices) {
        ibuf.resize(static_cast<std::size_t>(im.indices.size()));
        std::size_t i = 0;
        for (long r = 0; r < im.indices.rows(); ++r)
            for (long j = 0; j < im.indices.cols(); ++j) ibuf[i++] = im.indices(r, j);
        out.write(reinterpret_cast<const char*>(ibuf.data()),
                  static_cast<std::streamsize>(ibuf.size() * sizeof(std::uint16_t)));
    }
    out.flush();
    if (!out) throw DataError("container: write failed: " + path);
}

QuantizedLayer load_layer(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("container: cannot open: " + path);

    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EVAQ", 4) != 0)
        throw DataError("container: bad magic in " + path);
    if (read_u32(in, "version") != kLayerVersion)
        throw DataError("container: unsupported version in " + path);

    const std::uint32_t rows = read_u32(in, "rows");
    const std::uint32_t cols = read_u32(in, "cols");
    const std::uint32_t d = read_u32(in, "group_dim");
    const std::uint32_t n = read_u32(in, "index_bits");
    const std::uint32_t c_books = read_u32(in, "num_codebooks");
    const std::uint32_t share = read_u32(in, "channels_per_group");

    if (rows == 0 || cols == 0 || d == 0 || share == 0)
        throw DataError("container: zero dimension in " + path);
    if (n < 1 || n > 16 || c_books < 1)
        throw DataError("container: bad quantization header in " + path);
    if (rows % d != 0)
        throw DataError("container: group_dim does not divide rows in " + path);

    QuantizedLayer layer;
    layer.config.group_dim = static_cast<int>(d);
    layer.config.index_bits = static_cast<int>(n);
    layer.config.num_codebooks = static_cast<int>(c_books);
    layer.config.channels_per_group = static_cast<int>(share);
    layer.rows = rows;
    layer.cols = cols;

    const long v = layer.vectors_per_column();
    const long num_groups = layer.config.num_groups(cols);
    const int entries = layer.config.entries();

    layer.groups.resize(num_groups);
    std::vector<float> fbuf(static_cast<std::size_t>(d) * entries);
    for (long g = 0; g < num_groups; ++g) {
        layer.groups[g].resize(c_books);
        for (std::uint32_t c = 0; c < c_books; ++c) {
            in.read(reinterpret_cast<char*>(fbuf.data()),
                    static_cast<std::streamsize>(fbuf.size() * sizeof(float)));
            if (!in) throw DataError("container: truncated codebooks in " + path);
            Matrix m(d, entries);
            std::size_t i = 0;
            for (std::uint32_t r = 0; r < d; ++r)
                for (int e = 0; e < entries; ++e) m(r, e) = fbuf[i++];
            layer.groups[g][c].centroids = std::move(m);
        }
    }

    std::vector<std::uint16_t> ibuf(static_cast<std::size_t>(v) * cols);
    layer.index_matrices.resize(c_books);
    for (std::uint32_t c = 0; c < c_books; ++c) {
        in.read(reinterpret_cast<char*>(ibuf.data()),
                static_cast<std::streamsize>(ibuf.size() * sizeof(std::uint16_t)));
        if (!in) throw DataError("container: truncated indices in " + path);
        IndexGrid grid(v, cols);
        std::size_t i = 0;
        for (long r = 0; r < v; ++r)
            for (std::uint32_t j = 0; j < cols; ++j) {
                if (ibuf[i] >= entries)
                    throw DataError("container: index out of range in " + path);
                grid(r, j) = ibuf[i++];
            }
        layer.index_matrices[c] = IndexMatrix{std::move(grid), layer.config.index_bits};
    }

    expect_eof(in, path);
    layer.validate();
    return layer;
}

void save_weights(const Matrix& weights, const std::string& path) {
    if (weights.rows() < 1 || weights.cols() < 1)
        throw DataError("weights: empty matrix");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("weights: cannot open for write: " + path);
    out.write("EVAW", 4);
    write_u32(out, kWeightsVersion);
    write_u32(out, static_cast<std::uint32_t>(weights.rows()));
    write_u32(out, static_cast<std::uint32_t>(weights.cols()));
    std::vector<float> row(static_cast<std::size_t>(weights.cols()));
    for (long r = 0; r < weights.rows(); ++r) {
        for (long c = 0; c < weights.cols(); ++c)
            row[static_cast<std::size_t>(c)] = static_cast<float>(weights(r, c));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    out.flush();
    if (!out) throw DataError("weights: write failed: " + path);
}

Matrix load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("weights: cannot open: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EVAW", 4) != 0)
        throw DataError("weights: bad magic in " + path);
    if (read_u32(in, "version") != kWeightsVersion)
        throw DataError("weights: unsupported version in " + path);
    const std::uint32_t rows = read_u32(in, "rows");
    const std::uint32_t cols = read_u32(in, "cols");
    if (rows == 0 || cols == 0) throw DataError("weights: zero dimension in " + path);

    Matrix m(rows, cols);
    std::vector<float> row(cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw DataError("weights: truncated payload in " + path);
        for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    expect_eof(in, path);
    return m;
}

}  // namespace eva
