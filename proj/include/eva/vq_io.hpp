#pragma once

#include <string>

#include "eva/vq.hpp"

namespace eva {

// Quantized layer container, version 1. Little-endian throughout.
//   bytes 0..3   magic "EVAQ"
//   u32          version (1)
//   u32 x 6      K, N, d, n, C, N_share (N_share stored resolved, never 0)
//   then, for each column group g (G = ceil(N / N_share)) and codebook c in order:
//                d x 2^n float32, row-major (rows are vector dimensions)
//   then, for each codebook c:
//                (K/d) x N uint16, row-major
// Loaders reject bad magic/version, inconsistent sizes, truncated or oversized
// payloads and out-of-range indices.
void save_layer(const QuantizedLayer& layer, const std::string& path);
QuantizedLayer load_layer(const std::string& path);

// Raw weight matrix container, version 1: magic "EVAW", u32 version, u32 rows,
// u32 cols, float32 row-major little-endian payload.
void save_weights(const Matrix& weights, const std::string& path);
Matrix load_weights(const std::string& path);

}  // namespace eva
