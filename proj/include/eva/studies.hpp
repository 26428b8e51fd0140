#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eva/banked.hpp"
#include "eva/perf.hpp"

namespace eva {

struct Request {
    long input_len = 1;
    long output_len = 1;
};

struct RequestTrace {
    std::vector<Request> requests;
    double mean_input() const;
    double mean_output() const;
};

// Two-column CSV (input_len,output_len), optional header line, 1-based line
// numbers in error messages.
RequestTrace load_trace_csv(const std::string& path);

// Geometric lengths (support {1,2,...}) with the given means; deterministic per seed.
RequestTrace synthetic_trace(double mean_input, double mean_output, long count,
                             std::uint64_t seed);

struct ModelSpec {
    std::string name;
    std::vector<LayerShape> layers;  // one transformer block's linear layers
    int blocks = 1;
    double attention_cycles_per_token = 0.0;  // flat stand-in, default off
};

ModelSpec llama2_7b_block();

struct StudyRow {
    std::string study;
    std::string config;
    std::string param;
    double value = 0.0;
    double latency_cycles = 0.0;
    double energy_j = 0.0;
    std::vector<std::pair<std::string, double>> extras;
};

// Stable schema (v1): study,config,param,value,latency_cycles,energy_j,extras
std::string study_csv_header(char sep);
void write_study_csv(const std::vector<StudyRow>& rows, std::ostream& out, char sep);

std::uint64_t fnv1a64(std::string_view s);
std::string hash_hex(std::uint64_t h);

// Latency/energy over an EU-count range; latency flattens at the saturation
// point, energy keeps growing through the per-EU leakage proxy.
std::vector<StudyRow> dse_eu_sweep(const ArchSpec& arch, const VQConfig& cfg,
                                   const LayerShape& layer, int eu_min, int eu_max,
                                   const EnergyParams& params, int jobs = 1);

// Latency series per engine over a batch range, with the VQ-vs-INT8-fallback
// crossover annotated on the VQ rows.
std::vector<StudyRow> batch_sweep(const ArchSpec& arch,
                                  const std::vector<std::pair<std::string, VQConfig>>& vq_configs,
                                  const std::vector<BaselineSpec>& baselines,
                                  const LayerShape& layer, int batch_min,
                                  int batch_max, const EnergyParams& params,
                                  int jobs = 1);

// Epilogue-throughput comparison on one decode tile: a conventional dequantizer
// stream through banked codebook SRAM (conflicted / hot-replicated / ideal)
// against row-per-bank epilogue units of several widths.
struct ConflictStudyConfig {
    int rows = 32;              // index rows per tile
    long columns = 4096;
    int index_bits = 8;
    int lookups_per_cycle = 4;  // conventional demand, matched to bank count
    int num_banks = 4;
    int ports_per_bank = 1;
    int entry_bytes = 16;       // full codebook entry: group_dim x FP16
    long hot_budget = 128;      // replicated entries for the hot/cold row
    long fill_cycles = 38;
    std::uint64_t seed = 1;
};

std::vector<StudyRow> conflict_study(const ConflictStudyConfig& cfg);

struct EnginePreset {
    std::string name;
    bool vq = false;
    VQConfig vq_config;
    BaselineSpec baseline;
};

// The engine's VQ modes (W2/W3/W4), its INT8 fallback, and the dense stand-ins.
std::vector<EnginePreset> default_presets();

struct E2eRow {
    std::string preset;
    long requests = 0;
    double mean_input = 0.0;
    double mean_output = 0.0;
    double prefill_cycles = 0.0;
    double decode_cycles = 0.0;
    double total_cycles = 0.0;
    double decode_share = 0.0;
    double p50_cycles = 0.0;  // per-request total, nearest-rank percentiles
    double p95_cycles = 0.0;
    double energy_j = 0.0;
};

// Stable schema (v1): preset,requests,mean_input,mean_output,prefill_cycles,
// decode_cycles,total_cycles,decode_share,p50_cycles,p95_cycles,energy_j
std::string e2e_csv_header(char sep);
void write_e2e_csv(const std::vector<E2eRow>& rows, std::ostream& out, char sep);

// Per-request prefill + per-token decode over the whole trace, one row per preset.
std::vector<E2eRow> run_e2e(const RequestTrace& trace, const ModelSpec& model,
                            const ArchSpec& arch,
                            const std::vector<EnginePreset>& presets,
                            const EnergyParams& params);

}  // namespace eva
