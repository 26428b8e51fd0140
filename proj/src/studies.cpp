#include "eva/studies.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "eva/random.hpp"

namespace eva {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void parallel_for(long n, int jobs, const std::function<void(long)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int workers = static_cast<int>(std::min<long>(jobs, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (long i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

std::string extras_field(const std::vector<std::pair<std::string, double>>& extras) {
    std::string out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        if (i) out += ';';
        out += extras[i].first;
        out += '=';
        out += format_double(extras[i].second);
    }
    return out;
}

long parse_length(const std::string& field, long line_no, const std::string& path) {
    std::size_t used = 0;
    long value = 0;
    try {
        value = std::stol(field, &used);
    } catch (const std::exception&) {
        throw DataError(path + ": line " + std::to_string(line_no) +
                        ": not a number: '" + field + "'");
    }
    while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used])))
        ++used;
    if (used != field.size())
        throw DataError(path + ": line " + std::to_string(line_no) +
                        ": trailing junk in '" + field + "'");
    if (value < 1)
        throw DataError(path + ": line " + std::to_string(line_no) +
                        ": lengths must be >= 1");
    return value;
}

double percentile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::max<std::size_t>(1, rank) - 1];
}

}  // namespace

double RequestTrace::mean_input() const {
    if (requests.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : requests) total += static_cast<double>(r.input_len);
    return total / static_cast<double>(requests.size());
}

double RequestTrace::mean_output() const {
    if (requests.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : requests) total += static_cast<double>(r.output_len);
    return total / static_cast<double>(requests.size());
}

RequestTrace load_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("trace: cannot open: " + path);

    RequestTrace trace;
    std::string line;
    long line_no = 0;
    bool header_allowed = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty()) continue;

        if (header_allowed) {
            header_allowed = false;
            const bool alpha = std::any_of(trimmed.begin(), trimmed.end(), [](char c) {
                return std::isalpha(static_cast<unsigned char>(c)) != 0;
            });
            if (alpha) continue;  // header row
        }
        const std::size_t comma = trimmed.find(',');
        if (comma == std::string::npos)
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": expected two comma-separated columns");
        trace.requests.push_back(
            {parse_length(trimmed.substr(0, comma), line_no, path),
             parse_length(trimmed.substr(comma + 1), line_no, path)});
    }
    if (trace.requests.empty()) throw DataError("trace: no requests in " + path);
    return trace;
}

RequestTrace synthetic_trace(double mean_input, double mean_output, long count,
                             std::uint64_t seed) {
    if (mean_input < 1.0 || mean_output < 1.0)
        throw ConfigError("trace: means must be >= 1");
    if (count < 1) throw ConfigError("trace: count must be >= 1");
    std::mt19937_64 rng(mix_seed(seed, 0x7261636512ULL));
    RequestTrace trace;
    trace.requests.reserve(count);
    for (long i = 0; i < count; ++i) {
        const long in_len = static_cast<long>(geometric_from_mean(rng, mean_input));
        const long out_len = static_cast<long>(geometric_from_mean(rng, mean_output));
        trace.requests.push_back({in_len, out_len});
    }
    return trace;
}

ModelSpec llama2_7b_block() {
    ModelSpec spec;
    spec.name = "llama2_7b_block";
    spec.layers = {
        {4096, 4096},  {4096, 4096}, {4096, 4096}, {4096, 4096},  // q, k, v, o
        {4096, 11008}, {4096, 11008},                             // gate, up
        {11008, 4096},                                            // down
    };
    spec.blocks = 1;
    return spec;
}

std::string study_csv_header(char sep) {
    std::string h = "study,config,param,value,latency_cycles,energy_j,extras";
    if (sep != ',') std::replace(h.begin(), h.end(), ',', sep);
    return h;
}

void write_study_csv(const std::vector<StudyRow>& rows, std::ostream& out, char sep) {
    out << study_csv_header(sep) << '\n';
    for (const auto& r : rows)
        out << r.study << sep << r.config << sep << r.param << sep
            << format_double(r.value) << sep << format_double(r.latency_cycles) << sep
            << format_double(r.energy_j) << sep << extras_field(r.extras) << '\n';
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::vector<StudyRow> dse_eu_sweep(const ArchSpec& arch, const VQConfig& cfg,
                                   const LayerShape& layer, int eu_min, int eu_max,
                                   const EnergyParams& params, int jobs) {
    if (eu_min < 1 || eu_max < eu_min)
        throw ConfigError("dse: bad EU range");
    const int saturation = eu_saturation_point(arch, cfg, layer);
    const long n = eu_max - eu_min + 1;
    std::vector<StudyRow> rows(n);
    parallel_for(n, jobs, [&](long i) {
        ArchSpec probe = arch;
        probe.num_eus = eu_min + static_cast<int>(i);
        const DecodeReport rep = decode_stage_cycles(probe, cfg, layer, 1);
        const EnergyBreakdown e =
            energy(rep.counters, rep.stages.total, probe.num_eus, params);
        StudyRow row;
        row.study = "dse_eu";
        row.config = "vq_w" + format_double(effective_bitwidth(cfg));
        row.param = "num_eus";
        row.value = probe.num_eus;
        row.latency_cycles = static_cast<double>(rep.stages.total);
        row.energy_j = e.total();
        row.extras = {{"gemm", static_cast<double>(rep.stages.gemm)},
                      {"epilogue", static_cast<double>(rep.stages.epilogue)},
                      {"memory", static_cast<double>(rep.stages.memory)},
                      {"per_tile", static_cast<double>(rep.stages.per_tile)},
                      {"saturation_eus", static_cast<double>(saturation)}};
        rows[i] = std::move(row);
    });
    return rows;
}

std::vector<StudyRow> batch_sweep(const ArchSpec& arch,
                                  const std::vector<std::pair<std::string, VQConfig>>& vq_configs,
                                  const std::vector<BaselineSpec>& baselines,
                                  const LayerShape& layer, int batch_min,
                                  int batch_max, const EnergyParams& params,
                                  int jobs) {
    if (batch_min < 1 || batch_max < batch_min)
        throw ConfigError("batch sweep: bad batch range");
    const long span = batch_max - batch_min + 1;
    const long engines = static_cast<long>(vq_configs.size() + baselines.size());
    std::vector<StudyRow> rows(span * engines);

    std::vector<double> crossovers(vq_configs.size());
    for (std::size_t i = 0; i < vq_configs.size(); ++i) {
        const auto cross = batch_crossover(arch, vq_configs[i].second, layer,
                                           baseline_int8(), 4096);
        crossovers[i] = cross ? static_cast<double>(*cross) : 0.0;
    }

    parallel_for(span * engines, jobs, [&](long idx) {
        const long e = idx / span;
        const int batch = batch_min + static_cast<int>(idx % span);
        StudyRow row;
        row.study = "batch";
        row.param = "batch";
        row.value = batch;
        if (e < static_cast<long>(vq_configs.size())) {
            const auto& [name, cfg] = vq_configs[e];
            const DecodeReport rep = decode_stage_cycles(arch, cfg, layer, batch);
            row.config = name;
            row.latency_cycles = static_cast<double>(rep.stages.total);
            row.energy_j =
                energy(rep.counters, rep.stages.total, arch.num_eus, params).total();
            row.extras = {{"crossover_batch", crossovers[e]},
                          {"per_token", row.latency_cycles / batch}};
        } else {
            const auto& spec = baselines[e - vq_configs.size()];
            const BaselineReport rep = baseline_decode_latency(spec, layer, batch, arch);
            row.config = spec.name;
            row.latency_cycles = static_cast<double>(rep.latency);
            row.energy_j = energy(rep.counters, rep.latency, 0, params).total();
            row.extras = {{"utilization", rep.utilization},
                          {"per_token", row.latency_cycles / batch}};
        }
        rows[idx] = std::move(row);
    });
    return rows;
}

std::vector<StudyRow> conflict_study(const ConflictStudyConfig& cfg) {
    if (cfg.rows < 1 || cfg.columns < 1) throw ConfigError("conflict: empty tile");
    if (cfg.index_bits < 1 || cfg.index_bits > 16)
        throw ConfigError("conflict: index_bits must be in [1, 16]");
    if (cfg.hot_budget < 0) throw ConfigError("conflict: negative hot budget");
    if (cfg.fill_cycles < 0) throw ConfigError("conflict: negative fill");

    const int entries = 1 << cfg.index_bits;
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x636f6e66ULL));
    IndexGrid tile(cfg.rows, cfg.columns);
    for (long r = 0; r < cfg.rows; ++r)
        for (long j = 0; j < cfg.columns; ++j)
            tile(r, j) = static_cast<std::uint16_t>(uniform_index(rng, entries));

    const BankedBuffer conventional{cfg.num_banks, cfg.ports_per_bank, cfg.entry_bytes};
    const VqTraceResult conflicted =
        trace_conventional_vq(tile, cfg.lookups_per_cycle, conventional, cfg.entry_bytes);

    std::vector<std::uint64_t> freq(entries, 0);
    for (long r = 0; r < cfg.rows; ++r)
        for (long j = 0; j < cfg.columns; ++j) freq[tile(r, j)] += 1;
    const BankMapping mapping = hot_cold_replicate(freq, cfg.hot_budget);
    const VqTraceResult replicated = trace_replicated_vq(
        tile, cfg.lookups_per_cycle, conventional, mapping, cfg.entry_bytes);

    const double fill = static_cast<double>(cfg.fill_cycles);
    const double t_conflicted = static_cast<double>(conflicted.cycles) + fill;

    std::vector<StudyRow> rows;
    const auto push = [&](const std::string& variant, double latency,
                          double conflict_cycles, double bytes) {
        StudyRow row;
        row.study = "conflict";
        row.config = variant;
        row.param = "variant";
        row.value = static_cast<double>(rows.size());
        row.latency_cycles = latency;
        row.energy_j = 0.0;
        row.extras = {{"speedup", t_conflicted / latency},
                      {"conflict_cycles", conflict_cycles},
                      {"bytes_read", bytes}};
        rows.push_back(std::move(row));
    };

    push("vq_conflicted", t_conflicted,
         static_cast<double>(conflicted.conflict_cycles),
         static_cast<double>(conflicted.bytes_read));
    push("vq_replicated", static_cast<double>(replicated.cycles) + fill,
         static_cast<double>(replicated.conflict_cycles),
         static_cast<double>(replicated.bytes_read));
    push("vq_conflict_free", static_cast<double>(conflicted.ideal_cycles) + fill, 0.0,
         static_cast<double>(conflicted.bytes_read));

    struct EuVariant {
        const char* name;
        int width;
        int units;
    };
    for (const EuVariant& eu :
         {EuVariant{"eva_eu4x1", 4, 1}, EuVariant{"eva_eu32x1", 32, 1},
          EuVariant{"eva_eu32x4", 32, 4}}) {
        const BankedBuffer oc_buffer{eu.width, 1, 2};
        const long columns_per_eu =
            static_cast<long>(ceil_div(cfg.columns, eu.units));
        const VqTraceResult trace =
            eva_epilogue_trace(cfg.rows, columns_per_eu, eu.width, oc_buffer, 2);
        push(eu.name, static_cast<double>(trace.cycles) + fill,
             static_cast<double>(trace.conflict_cycles),
             static_cast<double>(trace.bytes_read) * eu.units);
    }
    return rows;
}

std::vector<EnginePreset> default_presets() {
    std::vector<EnginePreset> presets;
    for (const int books : {2, 3, 4}) {
        EnginePreset p;
        p.name = "eva_w" + std::to_string(books);
        p.vq = true;
        p.vq_config = VQConfig{8, 8, books, 0};
        presets.push_back(std::move(p));
    }
    for (const BaselineSpec& spec :
         {baseline_int8(), baseline_sa_fp16(), baseline_ant(), baseline_figna(),
          baseline_figlut()}) {
        EnginePreset p;
        p.name = spec.name;
        p.baseline = spec;
        presets.push_back(std::move(p));
    }
    return presets;
}

std::string e2e_csv_header(char sep) {
    std::string h =
        "preset,requests,mean_input,mean_output,prefill_cycles,decode_cycles,"
        "total_cycles,decode_share,p50_cycles,p95_cycles,energy_j";
    if (sep != ',') std::replace(h.begin(), h.end(), ',', sep);
    return h;
}

void write_e2e_csv(const std::vector<E2eRow>& rows, std::ostream& out, char sep) {
    out << e2e_csv_header(sep) << '\n';
    for (const auto& r : rows)
        out << r.preset << sep << r.requests << sep << format_double(r.mean_input)
            << sep << format_double(r.mean_output) << sep
            << format_double(r.prefill_cycles) << sep
            << format_double(r.decode_cycles) << sep
            << format_double(r.total_cycles) << sep
            << format_double(r.decode_share) << sep << format_double(r.p50_cycles)
            << sep << format_double(r.p95_cycles) << sep
            << format_double(r.energy_j) << '\n';
}

std::vector<E2eRow> run_e2e(const RequestTrace& trace, const ModelSpec& model,
                            const ArchSpec& arch,
                            const std::vector<EnginePreset>& presets,
                            const EnergyParams& params) {
    if (trace.requests.empty()) throw DataError("e2e: empty trace");
    if (model.layers.empty()) throw DataError("e2e: model has no layers");
    if (model.blocks < 1) throw ConfigError("e2e: blocks must be >= 1");

    std::vector<E2eRow> rows;
    rows.reserve(presets.size());
    for (const auto& preset : presets) {
        // per generated token: decode latency and energy across the block stack
        double token_cycles = 0.0;
        double token_energy = 0.0;
        for (const auto& layer : model.layers) {
            if (preset.vq) {
                const DecodeReport rep =
                    decode_stage_cycles(arch, preset.vq_config, layer, 1);
                token_cycles += static_cast<double>(rep.stages.total);
                token_energy +=
                    energy(rep.counters, rep.stages.total, arch.num_eus, params).total();
            } else {
                const BaselineReport rep =
                    baseline_decode_latency(preset.baseline, layer, 1, arch);
                token_cycles += static_cast<double>(rep.latency);
                token_energy += energy(rep.counters, rep.latency, 0, params).total();
            }
        }
        token_cycles = token_cycles * model.blocks + model.attention_cycles_per_token;
        token_energy *= model.blocks;

        E2eRow row;
        row.preset = preset.name;
        row.requests = static_cast<long>(trace.requests.size());
        row.mean_input = trace.mean_input();
        row.mean_output = trace.mean_output();

        std::vector<double> request_totals;
        request_totals.reserve(trace.requests.size());
        for (const auto& req : trace.requests) {
            double prefill = 0.0;
            double prefill_energy = 0.0;
            for (const auto& layer : model.layers) {
                prefill += static_cast<double>(
                    prefill_latency(arch, layer, req.input_len));
                TrafficCounters pf;
                pf.dram_weight_bytes =
                    static_cast<std::uint64_t>(layer.rows) * layer.cols;
                pf.dram_activation_bytes =
                    static_cast<std::uint64_t>(req.input_len) *
                    (layer.rows + layer.cols);
                pf.int8_macs = static_cast<std::uint64_t>(req.input_len) *
                               layer.rows * layer.cols;
                pf.sram_bytes = pf.dram_weight_bytes + pf.dram_activation_bytes;
                prefill_energy += energy(pf, 0, 0, params).total();
            }
            prefill = prefill * model.blocks +
                      model.attention_cycles_per_token * req.input_len;
            prefill_energy *= model.blocks;

            const double decode = token_cycles * req.output_len;
            row.prefill_cycles += prefill;
            row.decode_cycles += decode;
            row.energy_j += prefill_energy + token_energy * req.output_len;
            request_totals.push_back(prefill + decode);
        }
        row.total_cycles = row.prefill_cycles + row.decode_cycles;
        row.decode_share =
            row.total_cycles > 0.0 ? row.decode_cycles / row.total_cycles : 0.0;
        std::sort(request_totals.begin(), request_totals.end());
        row.p50_cycles = percentile(request_totals, 0.50);
        row.p95_cycles = percentile(request_totals, 0.95);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace eva
