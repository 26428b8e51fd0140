#include "eva/perf.hpp"

#include <algorithm>
#include <cmath>

namespace eva {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint64_t stream_cycles(std::uint64_t bytes, double bytes_per_cycle) {
    return static_cast<std::uint64_t>(
        std::ceil(static_cast<double>(bytes) / bytes_per_cycle));
}

void check_layer(const LayerShape& layer) {
    if (layer.rows < 1 || layer.cols < 1) throw DataError("perf: empty layer shape");
}

}  // namespace

void ArchSpec::validate() const {
    if (int8_array.rows < 1 || int8_array.cols < 1 || fp16_array.rows < 1 ||
        fp16_array.cols < 1)
        throw ConfigError("arch: array dimensions must be >= 1");
    if (num_eus < 1) throw ConfigError("arch: num_eus must be >= 1");
    if (eu_inputs < 1) throw ConfigError("arch: eu_inputs must be >= 1");
    if (frequency_hz <= 0.0) throw ConfigError("arch: frequency must be positive");
    if (dram_gbps <= 0.0) throw ConfigError("arch: dram bandwidth must be positive");
    if (decode_fill_cycles < 0 || tile_fill_cycles < 0)
        throw ConfigError("arch: fill cycles must be >= 0");
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Gemm: return "gemm";
        case Stage::Epilogue: return "epilogue";
        case Stage::Memory: return "memory";
    }
    return "?";
}

DecodeReport decode_stage_cycles(const ArchSpec& arch, const VQConfig& cfg,
                                 const LayerShape& layer, int batch) {
    arch.validate();
    cfg.validate();
    check_layer(layer);
    if (batch < 1) throw ConfigError("decode: batch must be >= 1");

    const int v = arch.fp16_array.rows;
    const int d = cfg.group_dim;
    const long tile_rows = static_cast<long>(d) * v;
    const long tiles = (layer.rows + tile_rows - 1) / tile_rows;
    const long padded_rows = tiles * tile_rows;  // padded work is counted
    const std::uint64_t groups = cfg.num_groups(layer.cols);
    const std::uint64_t books = cfg.num_codebooks;
    const std::uint64_t entries = cfg.entries();
    const std::uint64_t cols = layer.cols;
    const double bpc = arch.dram_bytes_per_cycle();

    StageCycles st;
    st.tiles = tiles;
    st.gemm = static_cast<std::uint64_t>(batch) * groups * books * entries;
    st.epilogue = ceil_div(static_cast<std::uint64_t>(batch) * books * cols,
                           static_cast<std::uint64_t>(arch.num_eus));
    const std::uint64_t tile_index_bytes =
        ceil_div(static_cast<std::uint64_t>(v) * cols * books * cfg.index_bits, 8);
    st.memory = stream_cycles(tile_index_bytes, bpc);  // shared across the batch
    st.per_tile = std::max({st.gemm, st.epilogue, st.memory});
    st.total = static_cast<std::uint64_t>(tiles) * st.per_tile +
               static_cast<std::uint64_t>(arch.decode_fill_cycles);
    if (st.gemm >= st.epilogue && st.gemm >= st.memory)
        st.dominating = Stage::Gemm;
    else if (st.memory >= st.epilogue)
        st.dominating = Stage::Memory;
    else
        st.dominating = Stage::Epilogue;

    TrafficCounters tc;
    const std::uint64_t codebook_bytes = groups * books * d * entries * 2;
    tc.dram_weight_bytes = static_cast<std::uint64_t>(tiles) * tile_index_bytes +
                           codebook_bytes;
    tc.dram_activation_bytes =
        static_cast<std::uint64_t>(batch) * (layer.rows + layer.cols) * 2;
    tc.fp16_macs = static_cast<std::uint64_t>(batch) * groups * books *
                   static_cast<std::uint64_t>(padded_rows) * entries;
    tc.eu_adds = static_cast<std::uint64_t>(batch) * books *
                 static_cast<std::uint64_t>(padded_rows / d) * cols;
    const std::uint64_t oc_write_bytes = static_cast<std::uint64_t>(batch) * tiles *
                                         groups * books * v * entries * 2;
    tc.sram_bytes = oc_write_bytes + tc.eu_adds * 2 + tc.dram_weight_bytes +
                    tc.dram_activation_bytes;
    return {st, tc};
}

int eu_saturation_point(const ArchSpec& arch, const VQConfig& cfg,
                        const LayerShape& layer) {
    ArchSpec probe = arch;
    probe.num_eus = 1;
    const DecodeReport rep = decode_stage_cycles(probe, cfg, layer, 1);
    const std::uint64_t epilogue_work = rep.stages.epilogue;  // C*N at one EU
    const std::uint64_t memory = std::max<std::uint64_t>(1, rep.stages.memory);
    return static_cast<int>(std::max<std::uint64_t>(1, ceil_div(epilogue_work, memory)));
}

std::vector<double> normalized_latency(const std::vector<VQConfig>& configs,
                                       const VQConfig& reference,
                                       const ArchSpec& arch,
                                       const LayerShape& layer) {
    const double ref =
        static_cast<double>(decode_stage_cycles(arch, reference, layer, 1).stages.total);
    std::vector<double> out;
    out.reserve(configs.size());
    for (const auto& cfg : configs)
        out.push_back(
            static_cast<double>(decode_stage_cycles(arch, cfg, layer, 1).stages.total) /
            ref);
    return out;
}

BaselineSpec baseline_sa_fp16() { return {"sa_fp16", 16, 16, 1.0, 32}; }
BaselineSpec baseline_ant() { return {"ant_int8", 8, 8, 1.0, 48}; }
BaselineSpec baseline_figna() { return {"figna_w4a16", 4, 16, 1.0, 48}; }
BaselineSpec baseline_figlut() { return {"figlut_w4a16", 4, 16, 4.0, 32}; }
BaselineSpec baseline_int8() { return {"int8_mode", 8, 8, 1.0, 32}; }

BaselineReport baseline_decode_latency(const BaselineSpec& spec,
                                       const LayerShape& layer, int batch,
                                       const ArchSpec& arch) {
    arch.validate();
    check_layer(layer);
    if (batch < 1) throw ConfigError("baseline: batch must be >= 1");
    if (spec.weight_bits < 1 || spec.act_bits < 1)
        throw ConfigError("baseline: bit widths must be >= 1");
    if (spec.throughput_multiplier <= 0.0)
        throw ConfigError("baseline: throughput multiplier must be positive");

    const std::uint64_t tiles =
        ceil_div(layer.rows, arch.int8_array.rows) *
        ceil_div(layer.cols, arch.int8_array.cols);

    BaselineReport rep;
    rep.compute_cycles = static_cast<std::uint64_t>(
        std::ceil(static_cast<double>(tiles) *
                  (batch + spec.tile_fill_cycles) / spec.throughput_multiplier));
    const std::uint64_t weight_bytes =
        ceil_div(static_cast<std::uint64_t>(layer.rows) * layer.cols * spec.weight_bits, 8);
    rep.memory_cycles = stream_cycles(weight_bytes, arch.dram_bytes_per_cycle());
    rep.latency = std::max(rep.compute_cycles, rep.memory_cycles);

    const double useful = static_cast<double>(tiles) * batch / spec.throughput_multiplier;
    rep.utilization = useful / static_cast<double>(rep.latency);

    rep.counters.dram_weight_bytes = weight_bytes;
    rep.counters.dram_activation_bytes = ceil_div(
        static_cast<std::uint64_t>(batch) * (layer.rows + layer.cols) * spec.act_bits, 8);
    const std::uint64_t macs =
        static_cast<std::uint64_t>(batch) * layer.rows * layer.cols;
    if (spec.act_bits <= 8)
        rep.counters.int8_macs = macs;
    else
        rep.counters.fp16_macs = macs;
    rep.counters.sram_bytes =
        rep.counters.dram_weight_bytes + rep.counters.dram_activation_bytes;
    return rep;
}

std::uint64_t prefill_latency(const ArchSpec& arch, const LayerShape& layer,
                              long m_tokens) {
    arch.validate();
    check_layer(layer);
    if (m_tokens < 1) throw ConfigError("prefill: token count must be >= 1");

    const std::uint64_t tiles =
        ceil_div(layer.rows, arch.int8_array.rows) *
        ceil_div(layer.cols, arch.int8_array.cols);
    const std::uint64_t compute =
        tiles * (static_cast<std::uint64_t>(m_tokens) + arch.tile_fill_cycles);
    const std::uint64_t weight_bytes =
        static_cast<std::uint64_t>(layer.rows) * layer.cols;  // INT8
    const std::uint64_t act_bytes =
        static_cast<std::uint64_t>(m_tokens) * layer.rows;
    const std::uint64_t memory =
        stream_cycles(std::max(weight_bytes, act_bytes), arch.dram_bytes_per_cycle());
    return std::max(compute, memory);
}

EnergyBreakdown energy(const TrafficCounters& counters, std::uint64_t cycles,
                       int num_eus, const EnergyParams& params) {
    if (num_eus < 0) throw ConfigError("energy: negative EU count");
    EnergyBreakdown e;
    const double dram_bytes =
        static_cast<double>(counters.dram_weight_bytes) +
        (params.include_activations
             ? static_cast<double>(counters.dram_activation_bytes)
             : 0.0);
    e.dram_j = dram_bytes * params.dram_pj_per_byte * 1e-12;
    e.sram_j = static_cast<double>(counters.sram_bytes) * params.sram_pj_per_byte * 1e-12;
    e.pe_j = (static_cast<double>(counters.int8_macs) * params.mac_int8_pj +
              static_cast<double>(counters.fp16_macs) * params.mac_fp16_pj) * 1e-12;
    e.eu_j = (static_cast<double>(counters.eu_adds) * params.add_pj +
              static_cast<double>(num_eus) * static_cast<double>(cycles) *
                  params.eu_static_pj_per_cycle) * 1e-12;
    return e;
}

std::optional<int> batch_crossover(const ArchSpec& arch, const VQConfig& cfg,
                                   const LayerShape& layer,
                                   const BaselineSpec& int8_mode, int max_batch) {
    if (max_batch < 1) throw ConfigError("crossover: max_batch must be >= 1");
    for (int b = 1; b <= max_batch; ++b) {
        const std::uint64_t vq = decode_stage_cycles(arch, cfg, layer, b).stages.total;
        const std::uint64_t dense =
            baseline_decode_latency(int8_mode, layer, b, arch).latency;
        if (vq > dense) return b;
    }
    return std::nullopt;
}

double pe_eu_ratio(int index_bits, int channels_per_group) {
    if (index_bits < 1 || index_bits > 16)
        throw ConfigError("pe_eu_ratio: index_bits must be in [1, 16]");
    if (channels_per_group < 1)
        throw ConfigError("pe_eu_ratio: channels_per_group must be >= 1");
    return static_cast<double>(1 << index_bits) / channels_per_group;
}

}  // namespace eva
