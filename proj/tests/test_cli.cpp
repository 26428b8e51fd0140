// Exercises the installed binary end to end through std::system. CMake points
// EVA_CLI_PATH at the freshly built tool.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Environment beats the build-time default so the binary can be retargeted.
std::string cli_path() {
    if (const char* p = std::getenv("EVA_CLI_PATH")) return p;
#ifdef EVA_CLI_PATH
    return EVA_CLI_PATH;
#else
    FAIL("EVA_CLI_PATH must point at the eva binary");
    return {};
#endif
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

RunResult run(const std::string& args, const std::string& env = "") {
    const fs::path out = fs::temp_directory_path() / "eva_cli_stdout.txt";
    const fs::path err = fs::temp_directory_path() / "eva_cli_stderr.txt";
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += cli_path() + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = status < 0 ? status : WEXITSTATUS(status);
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "eva_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path find_output(const fs::path& dir, const std::string& prefix) {
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind(prefix, 0) == 0) return entry.path();
    }
    FAIL("no file with prefix " << prefix << " in " << dir.string());
    return {};
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::istringstream in(line);
    std::string field;
    while (std::getline(in, field, sep)) fields.push_back(field);
    return fields;
}

}  // namespace

TEST_CASE("quantize: deterministic per seed, reports utilization") {
    const fs::path dir = fresh_dir("quantize");
    const std::string a = (dir / "a.evaq").string();
    const std::string b = (dir / "b.evaq").string();
    const std::string c = (dir / "c.evaq").string();

    RunResult r = run("quantize --synthetic 64 16 --seed 5 --out " + a);
    CHECK(r.code == 0);
    CHECK(r.out.find("final mse") != std::string::npos);
    CHECK(r.out.find("utilization") != std::string::npos);

    CHECK(run("quantize --synthetic 64 16 --seed 5 --out " + b).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(run("quantize --synthetic 64 16 --seed 6 --out " + c).code == 0);
    CHECK(slurp(a) != slurp(c));
}

TEST_CASE("quantize: group dim must divide the weight rows") {
    const fs::path dir = fresh_dir("quantize_bad");
    const RunResult r =
        run("quantize --synthetic 30 8 --out " + (dir / "q.evaq").string());
    CHECK(r.code == 3);
    CHECK(r.err.find("group_dim") != std::string::npos);
}

TEST_CASE("verify: round trip passes, impossible tolerance fails") {
    const fs::path dir = fresh_dir("verify");
    const std::string q = (dir / "q.evaq").string();
    REQUIRE(run("quantize --synthetic 64 16 --seed 5 --out " + q).code == 0);

    RunResult r = run("verify " + q + " --trials 8");
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);

    r = run("verify " + q + " --trials 8 --tolerance 1e-30");
    CHECK(r.code == 4);

    // truncated container
    const std::string full = slurp(q);
    const std::string cut = (dir / "cut.evaq").string();
    std::ofstream(cut, std::ios::binary) << full.substr(0, full.size() / 2);
    CHECK(run("verify " + cut).code == 3);

    CHECK(run("verify " + (dir / "missing.evaq").string()).code == 3);
}

TEST_CASE("simulate: frozen CSV row for the default config") {
    const fs::path dir = fresh_dir("simulate");
    const RunResult r = run("simulate --out-dir " + dir.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("dominating memory") != std::string::npos);

    const fs::path csv = find_output(dir, "simulate_");
    CHECK(csv.extension() == ".csv");
    const std::vector<std::string> lines = lines_of(slurp(csv));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] ==
          "config_hash,k,n_out,d,index_bits,codebooks,n_share,batch,tiles,"
          "gemm_per_tile,epilogue_per_tile,memory_per_tile,per_tile,latency_cycles,"
          "dominating,dram_weight_bytes,dram_activation_bytes,energy_dram_j,"
          "energy_sram_j,energy_pe_j,energy_eu_j,energy_total_j");
    const std::vector<std::string> cols = split(lines[1], ',');
    REQUIRE(cols.size() == 22);
    CHECK(cols[0].size() == 16);  // config hash
    CHECK(cols[1] == "4096");
    CHECK(cols[2] == "4096");
    CHECK(cols[3] == "8");
    CHECK(cols[4] == "8");
    CHECK(cols[5] == "2");
    CHECK(cols[6] == "4096");  // resolved share
    CHECK(cols[7] == "1");
    CHECK(cols[8] == "16");
    CHECK(cols[9] == "512");
    CHECK(cols[10] == "2048");
    CHECK(cols[11] == "2048");
    CHECK(cols[12] == "2048");
    CHECK(cols[13] == "32806");
    CHECK(cols[14] == "memory");

    // same config hashes to the same file name
    const RunResult again = run("simulate --out-dir " + dir.string());
    CHECK(again.code == 0);
    CHECK(find_output(dir, "simulate_") == csv);
}

TEST_CASE("simulate: batch flag and tsv format") {
    const fs::path dir = fresh_dir("simulate_tsv");
    const RunResult r =
        run("simulate --batch 8 --format tsv --out-dir " + dir.string());
    CHECK(r.code == 0);
    const fs::path tsv = find_output(dir, "simulate_");
    CHECK(tsv.extension() == ".tsv");
    const std::vector<std::string> lines = lines_of(slurp(tsv));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].find('\t') != std::string::npos);
    const std::vector<std::string> cols = split(lines[1], '\t');
    REQUIRE(cols.size() == 22);
    CHECK(cols[7] == "8");
}

TEST_CASE("config file: values land, unknown keys are named") {
    const fs::path dir = fresh_dir("config");
    const fs::path cfg = dir / "eva.json";
    std::ofstream(cfg) << R"({"arch": {"num_eus": 1}, "vq": {"num_codebooks": 1}})";
    const RunResult r =
        run("simulate --config " + cfg.string() + " --out-dir " + dir.string());
    CHECK(r.code == 0);
    const std::vector<std::string> lines = lines_of(slurp(find_output(dir, "simulate_")));
    const std::vector<std::string> cols = split(lines[1], ',');
    CHECK(cols[5] == "1");        // one codebook
    CHECK(cols[10] == "4096");    // epilogue on a single EU
    CHECK(cols[14] == "epilogue");

    std::ofstream(dir / "bad.json") << R"({"arch": {"bogus": 3}})";
    const RunResult bad = run("simulate --config " + (dir / "bad.json").string());
    CHECK(bad.code == 2);
    CHECK(bad.err.find("bogus") != std::string::npos);

    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run("simulate --config " + (dir / "broken.json").string()).code == 2);

    CHECK(run("simulate --config " + (dir / "missing.json").string()).code == 2);
}

TEST_CASE("EVA_SIM_OUT overrides --out-dir") {
    const fs::path flag_dir = fresh_dir("sink_flag");
    const fs::path env_dir = fresh_dir("sink_env");
    const RunResult r = run("simulate --out-dir " + flag_dir.string(),
                            "EVA_SIM_OUT=" + env_dir.string());
    CHECK(r.code == 0);
    CHECK(!find_output(env_dir, "simulate_").empty());
    bool flag_dir_empty = true;
    for (const auto& e : fs::directory_iterator(flag_dir)) {
        (void)e;
        flag_dir_empty = false;
    }
    CHECK(flag_dir_empty);
}

TEST_CASE("dse: EU sweep flattens at saturation") {
    const fs::path dir = fresh_dir("dse_eu");
    const RunResult r = run("dse --sweep eu 1..16 --out-dir " + dir.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("saturation_eus") != std::string::npos);
    const std::vector<std::string> lines = lines_of(slurp(find_output(dir, "dse_eu_")));
    REQUIRE(lines.size() == 17);
    std::string at4, at16;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> cols = split(lines[i], ',');
        REQUIRE(cols.size() == 7);
        if (cols[3] == "4") at4 = cols[4];
        if (cols[3] == "16") at16 = cols[4];
    }
    CHECK(at4 == "32806");
    CHECK(at16 == "32806");
}

TEST_CASE("dse: batch and conflict sweeps, bad kind rejected") {
    const fs::path dir = fresh_dir("dse_more");
    CHECK(run("dse --sweep batch 1..4 --out-dir " + dir.string()).code == 0);
    const std::vector<std::string> batch_lines =
        lines_of(slurp(find_output(dir, "batch_")));
    CHECK(batch_lines.size() == 1 + 3 * 4);  // vq_w2 + two dense baselines

    CHECK(run("dse --sweep conflict --out-dir " + dir.string()).code == 0);
    const std::vector<std::string> conflict_lines =
        lines_of(slurp(find_output(dir, "conflict_")));
    REQUIRE(conflict_lines.size() == 7);
    CHECK(conflict_lines[1].find("vq_conflicted") != std::string::npos);
    CHECK(conflict_lines[6].find("eva_eu32x4") != std::string::npos);

    CHECK(run("dse --sweep bogus --out-dir " + dir.string()).code == 2);

    // no --sweep falls back to the EU sweep over the configured range
    const fs::path plain = fresh_dir("dse_plain");
    CHECK(run("dse --out-dir " + plain.string()).code == 0);
    CHECK(lines_of(slurp(find_output(plain, "dse_eu_"))).size() == 17);
}

TEST_CASE("e2e: trace file and synthetic reproducibility") {
    const fs::path dir = fresh_dir("e2e");
    const fs::path trace = dir / "trace.csv";
    std::ofstream(trace) << "input_tokens,output_tokens\n10,200\n32,150\n8,300\n";

    const RunResult r =
        run("e2e --trace " + trace.string() + " --out-dir " + dir.string());
    CHECK(r.code == 0);
    const fs::path csv = find_output(dir, "e2e_");
    const std::vector<std::string> lines = lines_of(slurp(csv));
    REQUIRE(lines.size() == 9);  // header + 8 presets
    CHECK(lines[0].rfind("preset,", 0) == 0);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> cols = split(lines[i], ',');
        REQUIRE(cols.size() == 11);
        CHECK(cols[1] == "3");
        CHECK(std::stod(cols[7]) > 0.8);  // decode share
    }

    CHECK(run("e2e --trace " + (dir / "nope.csv").string()).code == 3);

    // synthetic path: same seed, same bytes
    const fs::path s1 = fresh_dir("e2e_s1");
    const fs::path s2 = fresh_dir("e2e_s2");
    CHECK(run("e2e --synthetic 20 100 --seed 3 --out-dir " + s1.string()).code == 0);
    CHECK(run("e2e --synthetic 20 100 --seed 3 --out-dir " + s2.string()).code == 0);
    CHECK(slurp(find_output(s1, "e2e_")) == slurp(find_output(s2, "e2e_")));
}

TEST_CASE("argument errors exit with the config code") {
    CHECK(run("").code == 2);                  // a subcommand is required
    CHECK(run("simulate --bogus").code == 2);  // unknown flag
    CHECK(run("frobnicate").code == 2);        // unknown subcommand
    CHECK(run("simulate --format xml").code == 2);
    CHECK(run("--help").code == 0);
    const RunResult help = run("--help");
    CHECK(help.out.find("quantize") != std::string::npos);
    CHECK(help.out.find("simulate") != std::string::npos);
}
