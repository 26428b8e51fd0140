#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eva/half.hpp"
#include "eva/vq.hpp"

namespace eva {

struct LayerShape {
    long rows = 4096;  // K, input features
    long cols = 4096;  // N, output channels
};

struct BufferSizes {
    long weight_codebook = 16 * 1024;
    long weight = 256 * 1024;
    long input = 32 * 1024;
    long output_codebook = 192 * 1024;
    long output = 32 * 1024;
    long total() const {
        return weight_codebook + weight + input + output_codebook + output;
    }
};

struct ArchSpec {
    ArrayMode int8_array = {PeMode::Int8, 32, 32};
    ArrayMode fp16_array = {PeMode::Fp16, 32, 8};
    int num_eus = 4;
    int eu_inputs = 32;           // adder-tree width, matches fp16_array.rows
    double frequency_hz = 500e6;
    double dram_gbps = 64.0;
    long decode_fill_cycles = 38;  // pipeline fill: array rows + group dim - 2
    long tile_fill_cycles = 32;    // INT8 array k-depth, used by prefill and baselines
    BufferSizes buffers;

    double dram_bytes_per_cycle() const { return dram_gbps * 1e9 / frequency_hz; }
    void validate() const;
};

enum class Stage { Gemm, Epilogue, Memory };
const char* stage_name(Stage s);

// Per-tile stage cycles of the decode pipeline. A tile covers fp16_array.rows
// index rows (d * v weight rows); stages overlap across tiles, so a token costs
// tiles * max(stages) plus one pipeline fill.
struct StageCycles {
    long tiles = 0;
    std::uint64_t gemm = 0;
    std::uint64_t epilogue = 0;
    std::uint64_t memory = 0;
    std::uint64_t per_tile = 0;
    std::uint64_t total = 0;
    Stage dominating = Stage::Memory;
};

struct TrafficCounters {
    std::uint64_t dram_weight_bytes = 0;      // packed index stream + codebooks
    std::uint64_t dram_activation_bytes = 0;  // input/output vectors
    std::uint64_t sram_bytes = 0;
    std::uint64_t int8_macs = 0;
    std::uint64_t fp16_macs = 0;
    std::uint64_t eu_adds = 0;
};

struct DecodeReport {
    StageCycles stages;
    TrafficCounters counters;
};

// Decode-phase model: per tile the FP16 array builds output codebooks
// (batch*G*C*2^n cycles), the EUs reduce (ceil(batch*C*N / num_eus)) and DRAM
// streams the tile's packed indices (batch-invariant). K pads up to whole tiles.
DecodeReport decode_stage_cycles(const ArchSpec& arch, const VQConfig& cfg,
                                 const LayerShape& layer, int batch);

// Smallest EU count at which the epilogue stage no longer exceeds the memory
// stage (batch 1).
int eu_saturation_point(const ArchSpec& arch, const VQConfig& cfg,
                        const LayerShape& layer);

// Batch-1 token latency of each config over the reference config's.
std::vector<double> normalized_latency(const std::vector<VQConfig>& configs,
                                       const VQConfig& reference,
                                       const ArchSpec& arch, const LayerShape& layer);

// Dense-engine stand-ins, parametric: an output-stationary array processes
// (K/array_rows)*(N/array_cols) tiles, each costing batch + fill cycles, divided
// by a LUT-style throughput multiplier where the technique provides one.
struct BaselineSpec {
    std::string name = "sa_fp16";
    int weight_bits = 16;
    int act_bits = 16;
    double throughput_multiplier = 1.0;
    long tile_fill_cycles = 32;
};

BaselineSpec baseline_sa_fp16();
BaselineSpec baseline_ant();     // INT8 quantized engine, longer fill
BaselineSpec baseline_figna();   // FP-INT engine, INT4 weights, longer fill
BaselineSpec baseline_figlut();  // LUT engine, INT4 weights, 4-wide LUT gain
BaselineSpec baseline_int8();    // this engine's own INT8 fallback mode

struct BaselineReport {
    std::uint64_t compute_cycles = 0;
    std::uint64_t memory_cycles = 0;
    std::uint64_t latency = 0;
    double utilization = 0.0;  // useful full-array cycles / latency
    TrafficCounters counters;
};

BaselineReport baseline_decode_latency(const BaselineSpec& spec,
                                       const LayerShape& layer, int batch,
                                       const ArchSpec& arch);

// Prefill on the INT8 array: compute (K/32)(N/32)(M + fill) against streaming
// the larger of weights and activations. M = 1 degenerates to dense decode.
std::uint64_t prefill_latency(const ArchSpec& arch, const LayerShape& layer,
                              long m_tokens);

// Linear counter model. Defaults are synthetic desk numbers, not measurements.
struct EnergyParams {
    double dram_pj_per_byte = 20.0;
    double sram_pj_per_byte = 0.5;
    double mac_int8_pj = 0.2;
    double mac_fp16_pj = 0.8;
    double add_pj = 0.05;
    double eu_static_pj_per_cycle = 1.0;  // leakage proxy, per EU per cycle
    bool include_activations = false;     // fold activation stream into DRAM energy
};

struct EnergyBreakdown {
    double dram_j = 0.0;
    double sram_j = 0.0;
    double pe_j = 0.0;
    double eu_j = 0.0;
    double total() const { return dram_j + sram_j + pe_j + eu_j; }
    double dram_share() const { return total() > 0.0 ? dram_j / total() : 0.0; }
};

EnergyBreakdown energy(const TrafficCounters& counters, std::uint64_t cycles,
                       int num_eus, const EnergyParams& params);

// Smallest batch at which VQ decode gets slower than the INT8 fallback.
std::optional<int> batch_crossover(const ArchSpec& arch, const VQConfig& cfg,
                                   const LayerShape& layer,
                                   const BaselineSpec& int8_mode,
                                   int max_batch = 4096);

// Codebook-product to epilogue work ratio, 2^n / N_share: >= 1 means the PE
// array side dominates the decode pipeline.
double pe_eu_ratio(int index_bits, int channels_per_group);

}  // namespace eva
