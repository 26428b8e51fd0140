// eva: vector-quantized matmul engine and accelerator model, CLI front end.
//
//   quantize   train additive codebooks on a weight matrix, write an EVAQ container
//   verify     re-check vq_matvec against dequantize+GEMV on random inputs
//   simulate   decode-stage latency and energy for one configuration
//   dse        sweeps over EU count, batch size, or the bank-conflict study
//   e2e        request-trace study across the engine presets
//
// Exit codes: 0 success, 2 config/schema error, 3 data error, 4 verification
// failure. The EVA_SIM_OUT environment variable overrides --out-dir.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "eva/error.hpp"
#include "eva/kernels.hpp"
#include "eva/perf.hpp"
#include "eva/random.hpp"
#include "eva/studies.hpp"
#include "eva/vq.hpp"
#include "eva/vq_io.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config schema. JSON sections mirror the library structs; unknown keys are
// rejected by name so typos cannot silently fall back to defaults.

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw eva::ConfigError("config: section '" + section + "' must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw eva::ConfigError("config: unknown key '" + item.key() + "' in '" +
                                   section + "'");
    }
}

double get_number(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number())
        throw eva::ConfigError("config: '" + key + "' must be a number");
    return j[key].get<double>();
}

long get_integer(const json& j, const std::string& key, long fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer())
        throw eva::ConfigError("config: '" + key + "' must be an integer");
    return j[key].get<long>();
}

bool get_flag(const json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean())
        throw eva::ConfigError("config: '" + key + "' must be a boolean");
    return j[key].get<bool>();
}

struct CliConfig {
    eva::ArchSpec arch;
    eva::VQConfig vq;  // defaults match the W2 engine configuration
    eva::LayerShape layer;
    eva::EnergyParams energy;
    int simulate_batch = 1;
    int eu_min = 1, eu_max = 16;
    int batch_min = 1, batch_max = 64;
    eva::ConflictStudyConfig conflict;
    long e2e_requests = 256;
    double e2e_mean_input = 22.25;   // Dolly-like request shape
    double e2e_mean_output = 246.87;
    int model_blocks = 1;
    double attention_cycles_per_token = 0.0;
};

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw eva::ConfigError("config: cannot open: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw eva::ConfigError("config: " + path + ": " + e.what());
    }
}

CliConfig parse_config(const json& root) {
    CliConfig cfg;
    check_keys(root, "top level",
               {"arch", "vq", "layer", "energy", "simulate", "dse", "batch",
                "conflict", "e2e", "model"});

    if (root.contains("arch")) {
        const json& a = root["arch"];
        check_keys(a, "arch",
                   {"num_eus", "eu_inputs", "frequency_hz", "dram_gbps",
                    "decode_fill_cycles", "tile_fill_cycles", "buffers"});
        cfg.arch.num_eus = static_cast<int>(get_integer(a, "num_eus", cfg.arch.num_eus));
        cfg.arch.eu_inputs =
            static_cast<int>(get_integer(a, "eu_inputs", cfg.arch.eu_inputs));
        cfg.arch.frequency_hz = get_number(a, "frequency_hz", cfg.arch.frequency_hz);
        cfg.arch.dram_gbps = get_number(a, "dram_gbps", cfg.arch.dram_gbps);
        cfg.arch.decode_fill_cycles =
            get_integer(a, "decode_fill_cycles", cfg.arch.decode_fill_cycles);
        cfg.arch.tile_fill_cycles =
            get_integer(a, "tile_fill_cycles", cfg.arch.tile_fill_cycles);
        if (a.contains("buffers")) {
            const json& b = a["buffers"];
            check_keys(b, "arch.buffers",
                       {"weight_codebook", "weight", "input", "output_codebook",
                        "output"});
            auto& bs = cfg.arch.buffers;
            bs.weight_codebook = get_integer(b, "weight_codebook", bs.weight_codebook);
            bs.weight = get_integer(b, "weight", bs.weight);
            bs.input = get_integer(b, "input", bs.input);
            bs.output_codebook = get_integer(b, "output_codebook", bs.output_codebook);
            bs.output = get_integer(b, "output", bs.output);
        }
    }
    if (root.contains("vq")) {
        const json& v = root["vq"];
        check_keys(v, "vq",
                   {"group_dim", "index_bits", "num_codebooks", "channels_per_group"});
        cfg.vq.group_dim = static_cast<int>(get_integer(v, "group_dim", cfg.vq.group_dim));
        cfg.vq.index_bits =
            static_cast<int>(get_integer(v, "index_bits", cfg.vq.index_bits));
        cfg.vq.num_codebooks =
            static_cast<int>(get_integer(v, "num_codebooks", cfg.vq.num_codebooks));
        cfg.vq.channels_per_group = static_cast<int>(
            get_integer(v, "channels_per_group", cfg.vq.channels_per_group));
    }
    if (root.contains("layer")) {
        const json& l = root["layer"];
        check_keys(l, "layer", {"rows", "cols"});
        cfg.layer.rows = get_integer(l, "rows", cfg.layer.rows);
        cfg.layer.cols = get_integer(l, "cols", cfg.layer.cols);
    }
    if (root.contains("energy")) {
        const json& e = root["energy"];
        check_keys(e, "energy",
                   {"dram_pj_per_byte", "sram_pj_per_byte", "mac_int8_pj",
                    "mac_fp16_pj", "add_pj", "eu_static_pj_per_cycle",
                    "include_activations"});
        auto& p = cfg.energy;
        p.dram_pj_per_byte = get_number(e, "dram_pj_per_byte", p.dram_pj_per_byte);
        p.sram_pj_per_byte = get_number(e, "sram_pj_per_byte", p.sram_pj_per_byte);
        p.mac_int8_pj = get_number(e, "mac_int8_pj", p.mac_int8_pj);
        p.mac_fp16_pj = get_number(e, "mac_fp16_pj", p.mac_fp16_pj);
        p.add_pj = get_number(e, "add_pj", p.add_pj);
        p.eu_static_pj_per_cycle =
            get_number(e, "eu_static_pj_per_cycle", p.eu_static_pj_per_cycle);
        p.include_activations =
            get_flag(e, "include_activations", p.include_activations);
    }
    if (root.contains("simulate")) {
        const json& s = root["simulate"];
        check_keys(s, "simulate", {"batch"});
        cfg.simulate_batch = static_cast<int>(get_integer(s, "batch", cfg.simulate_batch));
    }
    if (root.contains("dse")) {
        const json& d = root["dse"];
        check_keys(d, "dse", {"eu_min", "eu_max"});
        cfg.eu_min = static_cast<int>(get_integer(d, "eu_min", cfg.eu_min));
        cfg.eu_max = static_cast<int>(get_integer(d, "eu_max", cfg.eu_max));
    }
    if (root.contains("batch")) {
        const json& b = root["batch"];
        check_keys(b, "batch", {"min", "max"});
        cfg.batch_min = static_cast<int>(get_integer(b, "min", cfg.batch_min));
        cfg.batch_max = static_cast<int>(get_integer(b, "max", cfg.batch_max));
    }
    if (root.contains("conflict")) {
        const json& c = root["conflict"];
        check_keys(c, "conflict",
                   {"rows", "columns", "index_bits", "lookups_per_cycle", "num_banks",
                    "ports_per_bank", "entry_bytes", "hot_budget", "fill_cycles"});
        auto& k = cfg.conflict;
        k.rows = static_cast<int>(get_integer(c, "rows", k.rows));
        k.columns = get_integer(c, "columns", k.columns);
        k.index_bits = static_cast<int>(get_integer(c, "index_bits", k.index_bits));
        k.lookups_per_cycle =
            static_cast<int>(get_integer(c, "lookups_per_cycle", k.lookups_per_cycle));
        k.num_banks = static_cast<int>(get_integer(c, "num_banks", k.num_banks));
        k.ports_per_bank =
            static_cast<int>(get_integer(c, "ports_per_bank", k.ports_per_bank));
        k.entry_bytes = static_cast<int>(get_integer(c, "entry_bytes", k.entry_bytes));
        k.hot_budget = get_integer(c, "hot_budget", k.hot_budget);
        k.fill_cycles = get_integer(c, "fill_cycles", k.fill_cycles);
    }
    if (root.contains("e2e")) {
        const json& e = root["e2e"];
        check_keys(e, "e2e", {"requests", "mean_input", "mean_output"});
        cfg.e2e_requests = get_integer(e, "requests", cfg.e2e_requests);
        cfg.e2e_mean_input = get_number(e, "mean_input", cfg.e2e_mean_input);
        cfg.e2e_mean_output = get_number(e, "mean_output", cfg.e2e_mean_output);
    }
    if (root.contains("model")) {
        const json& m = root["model"];
        check_keys(m, "model", {"blocks", "attention_cycles_per_token"});
        cfg.model_blocks = static_cast<int>(get_integer(m, "blocks", cfg.model_blocks));
        cfg.attention_cycles_per_token =
            get_number(m, "attention_cycles_per_token", cfg.attention_cycles_per_token);
    }
    cfg.arch.validate();
    cfg.vq.validate();
    return cfg;
}

// Canonical dump of every effective setting; hashed into output file names so
// reruns with the same inputs land on the same file.
json effective_json(const CliConfig& c, std::uint64_t seed) {
    json j;
    j["arch"] = {{"num_eus", c.arch.num_eus},
                 {"eu_inputs", c.arch.eu_inputs},
                 {"frequency_hz", c.arch.frequency_hz},
                 {"dram_gbps", c.arch.dram_gbps},
                 {"decode_fill_cycles", c.arch.decode_fill_cycles},
                 {"tile_fill_cycles", c.arch.tile_fill_cycles},
                 {"buffers",
                  {{"weight_codebook", c.arch.buffers.weight_codebook},
                   {"weight", c.arch.buffers.weight},
                   {"input", c.arch.buffers.input},
                   {"output_codebook", c.arch.buffers.output_codebook},
                   {"output", c.arch.buffers.output}}}};
    j["vq"] = {{"group_dim", c.vq.group_dim},
               {"index_bits", c.vq.index_bits},
               {"num_codebooks", c.vq.num_codebooks},
               {"channels_per_group", c.vq.channels_per_group}};
    j["layer"] = {{"rows", c.layer.rows}, {"cols", c.layer.cols}};
    j["energy"] = {{"dram_pj_per_byte", c.energy.dram_pj_per_byte},
                   {"sram_pj_per_byte", c.energy.sram_pj_per_byte},
                   {"mac_int8_pj", c.energy.mac_int8_pj},
                   {"mac_fp16_pj", c.energy.mac_fp16_pj},
                   {"add_pj", c.energy.add_pj},
                   {"eu_static_pj_per_cycle", c.energy.eu_static_pj_per_cycle},
                   {"include_activations", c.energy.include_activations}};
    j["seed"] = seed;
    return j;
}

// ---------------------------------------------------------------------------
// Output plumbing.

struct OutputSink {
    std::filesystem::path dir;
    char sep = ',';
    const char* ext = "csv";

    std::filesystem::path file(const std::string& study, std::uint64_t hash) const {
        return dir / (study + "_" + eva::hash_hex(hash) + "." + ext);
    }
};

OutputSink make_sink(const std::string& out_dir, const std::string& format) {
    OutputSink sink;
    const char* env = std::getenv("EVA_SIM_OUT");
    sink.dir = (env && *env) ? std::filesystem::path(env)
                             : std::filesystem::path(out_dir);
    if (format == "tsv") {
        sink.sep = '\t';
        sink.ext = "tsv";
    }
    std::error_code ec;
    std::filesystem::create_directories(sink.dir, ec);
    if (ec)
        throw eva::DataError("output: cannot create directory: " + sink.dir.string());
    return sink;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw eva::DataError("output: cannot write: " + path.string());
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// Commands.

eva::Matrix synthetic_weights(long rows, long cols, std::uint64_t seed) {
    std::mt19937_64 rng(eva::mix_seed(seed, 0x57454947ULL));
    eva::Matrix w(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) w(i, j) = eva::normal_unit(rng);
    return w;
}

int cmd_quantize(const CliConfig& cfg, std::uint64_t seed,
                 const std::vector<long>& synthetic, const std::string& weights_path,
                 std::string out_path, const OutputSink& sink) {
    eva::Matrix weights;
    if (!synthetic.empty()) {
        if (synthetic.size() != 2 || synthetic[0] < 1 || synthetic[1] < 1)
            throw eva::ConfigError("quantize: --synthetic takes K N (positive)");
        weights = synthetic_weights(synthetic[0], synthetic[1], seed);
    } else if (!weights_path.empty()) {
        weights = eva::load_weights(weights_path);
    } else {
        throw eva::ConfigError("quantize: need --synthetic K N or --weights FILE");
    }

    eva::TrainReport report;
    const eva::QuantizedLayer layer =
        eva::train_codebooks(weights, cfg.vq, seed, &report);

    if (out_path.empty()) out_path = (sink.dir / "quantized.evaq").string();
    eva::save_layer(layer, out_path);

    std::cout << "quantize: K=" << layer.rows << " N=" << layer.cols
              << " d=" << cfg.vq.group_dim << " n=" << cfg.vq.index_bits
              << " C=" << cfg.vq.num_codebooks
              << " share=" << layer.config.channels_per_group << "\n";
    for (std::size_t c = 0; c < report.stage_mse.size(); ++c)
        std::cout << "  stage " << c + 1 << " residual mse: " << fmt(report.stage_mse[c])
                  << "\n";
    std::cout << "  final mse: " << fmt(report.final_mse) << "\n";
    for (std::size_t c = 0; c < layer.index_matrices.size(); ++c)
        std::cout << "  utilization[" << c
                  << "]: " << fmt(eva::empirical_utilization(layer.index_matrices[c]))
                  << " (expected "
                  << fmt(eva::expected_utilization(cfg.vq.index_bits, layer.cols))
                  << ")\n";
    std::cout << "  wrote: " << out_path << " ("
              << std::filesystem::file_size(out_path) << " bytes)\n";
    return 0;
}

int cmd_verify(const std::string& layer_path, int trials, double tolerance,
               std::uint64_t seed) {
    if (trials < 1) throw eva::ConfigError("verify: --trials must be >= 1");
    const eva::QuantizedLayer layer = eva::load_layer(layer_path);
    const eva::Matrix dense = eva::dequantize(layer);

    std::mt19937_64 rng(eva::mix_seed(seed, 0x56455249ULL));
    double max_rel = 0.0;
    for (int t = 0; t < trials; ++t) {
        eva::Vector x(layer.rows);
        for (long i = 0; i < layer.rows; ++i) x(i) = eva::normal_unit(rng);
        const eva::Vector got = eva::vq_matvec(x, layer);
        const eva::Vector want = eva::gemv_reference(x, dense);
        const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
        max_rel = std::max(max_rel, (got - want).cwiseAbs().maxCoeff() / scale);
    }
    std::cout << "verify: " << trials << " trials, max relative error "
              << fmt(max_rel) << " (tolerance " << fmt(tolerance) << ")\n";
    if (max_rel > tolerance)
        throw eva::VerifyError("verify: max relative error " + fmt(max_rel) +
                               " exceeds " + fmt(tolerance));
    std::cout << "verify: PASS\n";
    return 0;
}

int cmd_simulate(const CliConfig& cfg, int batch, std::uint64_t seed,
                 const OutputSink& sink) {
    if (batch < 1) throw eva::ConfigError("simulate: batch must be >= 1");
    const eva::DecodeReport rep =
        eva::decode_stage_cycles(cfg.arch, cfg.vq, cfg.layer, batch);
    const eva::EnergyBreakdown e =
        eva::energy(rep.counters, rep.stages.total, cfg.arch.num_eus, cfg.energy);

    json eff = effective_json(cfg, seed);
    eff["simulate"] = {{"batch", batch}};
    const std::uint64_t hash = eva::fnv1a64(eff.dump());
    const auto path = sink.file("simulate", hash);

    const char s = sink.sep;
    auto out = open_out(path);
    // Stable schema (v1).
    std::string header =
        "config_hash,k,n_out,d,index_bits,codebooks,n_share,batch,tiles,"
        "gemm_per_tile,epilogue_per_tile,memory_per_tile,per_tile,latency_cycles,"
        "dominating,dram_weight_bytes,dram_activation_bytes,energy_dram_j,"
        "energy_sram_j,energy_pe_j,energy_eu_j,energy_total_j";
    if (s != ',') std::replace(header.begin(), header.end(), ',', s);
    out << header << '\n';
    out << eva::hash_hex(hash) << s << cfg.layer.rows << s << cfg.layer.cols << s
        << cfg.vq.group_dim << s << cfg.vq.index_bits << s << cfg.vq.num_codebooks
        << s << cfg.vq.resolved_share(cfg.layer.cols) << s << batch << s
        << rep.stages.tiles << s << rep.stages.gemm << s << rep.stages.epilogue << s
        << rep.stages.memory << s << rep.stages.per_tile << s << rep.stages.total
        << s << eva::stage_name(rep.stages.dominating) << s
        << rep.counters.dram_weight_bytes << s << rep.counters.dram_activation_bytes
        << s << fmt(e.dram_j) << s << fmt(e.sram_j) << s << fmt(e.pe_j) << s
        << fmt(e.eu_j) << s << fmt(e.total()) << '\n';
    out.close();

    std::cout << "simulate: K=" << cfg.layer.rows << " N=" << cfg.layer.cols
              << " d=" << cfg.vq.group_dim << " n=" << cfg.vq.index_bits
              << " C=" << cfg.vq.num_codebooks << " batch=" << batch << "\n"
              << "  tiles " << rep.stages.tiles << ", per-tile stages: gemm "
              << rep.stages.gemm << ", epilogue " << rep.stages.epilogue
              << ", memory " << rep.stages.memory << " (dominating "
              << eva::stage_name(rep.stages.dominating) << ")\n"
              << "  latency " << rep.stages.total << " cycles, energy "
              << fmt(e.total()) << " J (dram " << fmt(100.0 * e.dram_share())
              << "%)\n"
              << "  wrote: " << path.string() << "\n";
    return 0;
}

std::pair<int, int> parse_range(const std::string& text, int def_lo, int def_hi) {
    if (text.empty()) return {def_lo, def_hi};
    const auto dots = text.find("..");
    if (dots == std::string::npos)
        throw eva::ConfigError("dse: range must look like LO..HI, got '" + text + "'");
    try {
        const int lo = std::stoi(text.substr(0, dots));
        const int hi = std::stoi(text.substr(dots + 2));
        if (lo < 1 || hi < lo) throw eva::ConfigError("dse: bad range '" + text + "'");
        return {lo, hi};
    } catch (const std::invalid_argument&) {
        throw eva::ConfigError("dse: bad range '" + text + "'");
    } catch (const std::out_of_range&) {
        throw eva::ConfigError("dse: bad range '" + text + "'");
    }
}

void print_study_summary(const std::vector<eva::StudyRow>& rows) {
    for (const auto& r : rows) {
        std::cout << "  " << r.study << " " << r.config << " " << r.param << "="
                  << fmt(r.value) << " latency=" << fmt(r.latency_cycles);
        for (const auto& [k, v] : r.extras)
            if (k == "speedup" || k == "saturation_eus" || k == "crossover_batch")
                std::cout << " " << k << "=" << fmt(v);
        std::cout << "\n";
    }
}

int cmd_dse(const CliConfig& cfg, const std::vector<std::string>& sweep,
            std::uint64_t seed, int jobs, const OutputSink& sink) {
    const std::string kind = sweep.empty() ? "eu" : sweep[0];
    const std::string range = sweep.size() > 1 ? sweep[1] : "";

    std::vector<eva::StudyRow> rows;
    std::string study;
    json eff = effective_json(cfg, seed);
    if (kind == "eu") {
        const auto [lo, hi] = parse_range(range, cfg.eu_min, cfg.eu_max);
        rows = eva::dse_eu_sweep(cfg.arch, cfg.vq, cfg.layer, lo, hi, cfg.energy, jobs);
        study = "dse_eu";
        eff["dse"] = {{"eu_min", lo}, {"eu_max", hi}};
    } else if (kind == "batch") {
        const auto [lo, hi] = parse_range(range, cfg.batch_min, cfg.batch_max);
        std::vector<std::pair<std::string, eva::VQConfig>> vq_configs = {
            {"vq_w" + fmt(eva::effective_bitwidth(cfg.vq)), cfg.vq}};
        const std::vector<eva::BaselineSpec> baselines = {eva::baseline_sa_fp16(),
                                                          eva::baseline_int8()};
        rows = eva::batch_sweep(cfg.arch, vq_configs, baselines, cfg.layer, lo, hi,
                                cfg.energy, jobs);
        study = "batch";
        eff["batch"] = {{"min", lo}, {"max", hi}};
    } else if (kind == "conflict") {
        eva::ConflictStudyConfig c = cfg.conflict;
        c.seed = seed;
        rows = eva::conflict_study(c);
        study = "conflict";
        eff["conflict"] = {{"rows", c.rows},
                           {"columns", c.columns},
                           {"index_bits", c.index_bits},
                           {"lookups_per_cycle", c.lookups_per_cycle},
                           {"num_banks", c.num_banks},
                           {"ports_per_bank", c.ports_per_bank},
                           {"entry_bytes", c.entry_bytes},
                           {"hot_budget", c.hot_budget},
                           {"fill_cycles", c.fill_cycles}};
    } else {
        throw eva::ConfigError("dse: unknown sweep '" + kind +
                               "' (expected eu, batch, or conflict)");
    }

    const std::uint64_t hash = eva::fnv1a64(eff.dump());
    const auto path = sink.file(study, hash);
    auto out = open_out(path);
    eva::write_study_csv(rows, out, sink.sep);
    out.close();

    std::cout << "dse: sweep " << kind << ", " << rows.size() << " rows\n";
    print_study_summary(rows);
    std::cout << "  wrote: " << path.string() << "\n";
    return 0;
}

int cmd_e2e(const CliConfig& cfg, const std::string& trace_path,
            const std::vector<double>& synthetic, std::uint64_t seed,
            const OutputSink& sink) {
    eva::RequestTrace trace;
    json eff = effective_json(cfg, seed);
    if (!trace_path.empty()) {
        trace = eva::load_trace_csv(trace_path);
        eff["e2e"] = {{"trace", trace_path}};
    } else {
        double mean_in = cfg.e2e_mean_input;
        double mean_out = cfg.e2e_mean_output;
        if (!synthetic.empty()) {
            if (synthetic.size() != 2)
                throw eva::ConfigError("e2e: --synthetic takes MEAN_IN MEAN_OUT");
            mean_in = synthetic[0];
            mean_out = synthetic[1];
        }
        trace = eva::synthetic_trace(mean_in, mean_out, cfg.e2e_requests, seed);
        eff["e2e"] = {{"requests", cfg.e2e_requests},
                      {"mean_input", mean_in},
                      {"mean_output", mean_out}};
    }

    eva::ModelSpec model = eva::llama2_7b_block();
    model.blocks = cfg.model_blocks;
    model.attention_cycles_per_token = cfg.attention_cycles_per_token;

    const std::vector<eva::E2eRow> rows =
        eva::run_e2e(trace, model, cfg.arch, eva::default_presets(), cfg.energy);

    const std::uint64_t hash = eva::fnv1a64(eff.dump());
    const auto path = sink.file("e2e", hash);
    auto out = open_out(path);
    eva::write_e2e_csv(rows, out, sink.sep);
    out.close();

    std::cout << "e2e: " << trace.requests.size() << " requests, mean input "
              << fmt(trace.mean_input()) << ", mean output "
              << fmt(trace.mean_output()) << "\n";
    for (const auto& r : rows)
        std::cout << "  " << std::left << std::setw(12) << r.preset << std::right
                  << " total=" << fmt(r.total_cycles)
                  << " decode_share=" << fmt(r.decode_share)
                  << " p95=" << fmt(r.p95_cycles) << "\n";
    std::cout << "  wrote: " << path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"eva: vector-quantized matmul engine and accelerator model"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    std::string config_path;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out_dir = ".";
    std::string format = "csv";
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--seed", seed, "seed for every stochastic component");
    app.add_option("--jobs", jobs, "worker threads for sweep evaluation");
    app.add_option("--out-dir", out_dir,
                   "output directory (EVA_SIM_OUT overrides)");
    app.add_option("--format", format, "output format")
        ->check(CLI::IsMember({"csv", "tsv"}));

    auto* quantize = app.add_subcommand("quantize", "train codebooks, write EVAQ");
    std::vector<long> synthetic_kn;
    std::string weights_path, quant_out;
    quantize->add_option("--synthetic", synthetic_kn,
                         "generate a K x N standard-normal weight matrix")
        ->expected(2);
    quantize->add_option("--weights", weights_path, "EVAW weight container to read");
    quantize->add_option("--out", quant_out, "EVAQ output path");

    auto* verify = app.add_subcommand("verify", "equivalence check on an EVAQ file");
    std::string layer_path;
    int trials = 32;
    double tolerance = 1e-9;
    verify->add_option("layer", layer_path, "EVAQ container")->required();
    verify->add_option("--trials", trials, "random inputs to test");
    verify->add_option("--tolerance", tolerance, "max relative error accepted");

    auto* simulate = app.add_subcommand("simulate", "decode latency/energy for one config");
    int batch = 0;
    simulate->add_option("--batch", batch, "token batch size");

    auto* dse = app.add_subcommand("dse", "design-space sweeps");
    std::vector<std::string> sweep;
    dse->add_option("--sweep", sweep, "eu|batch|conflict, optional LO..HI range")
        ->expected(1, 2);

    auto* e2e = app.add_subcommand("e2e", "request-trace study over engine presets");
    std::string trace_path;
    std::vector<double> synthetic_means;
    e2e->add_option("--trace", trace_path, "request CSV (input_len,output_len)");
    e2e->add_option("--synthetic", synthetic_means,
                    "synthetic trace means: MEAN_IN MEAN_OUT")
        ->expected(2);

    try {
        app.parse(argc, argv);

        const json root = config_path.empty() ? json::object() : load_json(config_path);
        const CliConfig cfg = parse_config(root);
        const OutputSink sink = make_sink(out_dir, format);

        if (*quantize)
            return cmd_quantize(cfg, seed, synthetic_kn, weights_path, quant_out, sink);
        if (*verify) return cmd_verify(layer_path, trials, tolerance, seed);
        if (*simulate)
            return cmd_simulate(cfg, batch > 0 ? batch : cfg.simulate_batch, seed, sink);
        if (*dse) return cmd_dse(cfg, sweep, seed, jobs, sink);
        if (*e2e) return cmd_e2e(cfg, trace_path, synthetic_means, seed, sink);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const eva::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const eva::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const eva::VerifyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
