#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <vector>

#include "eva/banked.hpp"
#include "eva/random.hpp"

using namespace eva;

namespace {

IndexGrid random_tile(long rows, long cols, int entries, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 5));
    IndexGrid tile(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long j = 0; j < cols; ++j)
            tile(r, j) = static_cast<std::uint16_t>(uniform_index(rng, entries));
    return tile;
}

// Independent re-derivation of the conventional schedule: per batch, the worst
// bank occupancy divided by the port count.
std::uint64_t oracle_cycles(const IndexGrid& tile, int per_cycle,
                            const BankedBuffer& buffer) {
    std::vector<std::uint64_t> occ(buffer.num_banks);
    std::uint64_t cycles = 0;
    long in_batch = 0;
    std::fill(occ.begin(), occ.end(), 0);
    for (long r = 0; r < tile.rows(); ++r)
        for (long j = 0; j < tile.cols(); ++j) {
            occ[tile(r, j) % buffer.num_banks] += 1;
            if (++in_batch == per_cycle) {
                const std::uint64_t m = *std::max_element(occ.begin(), occ.end());
                cycles += std::max<std::uint64_t>(
                    1, (m + buffer.ports_per_bank - 1) / buffer.ports_per_bank);
                std::fill(occ.begin(), occ.end(), 0);
                in_batch = 0;
            }
        }
    if (in_batch > 0) {
        const std::uint64_t m = *std::max_element(occ.begin(), occ.end());
        cycles += std::max<std::uint64_t>(
            1, (m + buffer.ports_per_bank - 1) / buffer.ports_per_bank);
    }
    return cycles;
}

}  // namespace

TEST_CASE("eight lookups into one bank serialize to eight cycles") {
    AccessBatch batch;
    for (int i = 0; i < 8; ++i) batch.accesses.push_back({0, i});
    const ScheduleResult r = schedule({batch}, BankedBuffer{4, 1, 2}, nullptr);
    CHECK(r.cycles == 8);
    CHECK(r.conflict_cycles == 7);

    // identical addresses stall identically: no same-address merging
    AccessBatch same;
    for (int i = 0; i < 8; ++i) same.accesses.push_back({0, 0});
    const ScheduleResult rs = schedule({same}, BankedBuffer{4, 1, 2}, nullptr);
    CHECK(rs.cycles == 8);

    // dual ports cut the serialization in half
    const ScheduleResult r2 = schedule({batch}, BankedBuffer{4, 2, 2}, nullptr);
    CHECK(r2.cycles == 4);

    CHECK_THROWS_AS(schedule({batch}, BankedBuffer{0, 1, 2}, nullptr), ConfigError);
    AccessBatch bad;
    bad.accesses.push_back({9, 0});
    CHECK_THROWS_AS(schedule({bad}, BankedBuffer{4, 1, 2}, nullptr), DataError);
}

TEST_CASE("trace rows carry cycle numbers and stall flags") {
    AccessBatch a;
    a.accesses.push_back({0, 3});
    a.accesses.push_back({0, 3});
    a.accesses.push_back({1, 5});
    AccessBatch b;
    b.accesses.push_back({2, 1});

    std::vector<TraceRow> trace;
    const ScheduleResult r = schedule({a, b}, BankedBuffer{4, 1, 2}, &trace);
    CHECK(r.cycles == 3);  // batch a needs 2 cycles, batch b needs 1
    REQUIRE(trace.size() == 4);
    CHECK(trace[0].cycle == 0);
    CHECK(!trace[0].stalled);
    CHECK(trace[1].cycle == 1);  // second hit on bank 0 waits a cycle
    CHECK(trace[1].stalled);
    CHECK(trace[2].cycle == 0);  // bank 1 is free in the first cycle
    CHECK(!trace[2].stalled);
    CHECK(trace[3].cycle == 2);  // second batch starts after the first drains
    CHECK(trace[3].bank == 2);
}

TEST_CASE("all-identical indices slow down by the full issue width") {
    IndexGrid tile(4, 64);
    tile.setConstant(7);
    const VqTraceResult r =
        trace_conventional_vq(tile, 8, BankedBuffer{4, 1, 2}, 16);
    CHECK(r.slowdown == 8.0);  // every batch of 8 hits one bank
    CHECK(r.ideal_cycles == 32);
    CHECK(r.cycles == 256);
}

TEST_CASE("random tile through dual-ported banks lands near the analytic mean") {
    // 8 lookups per cycle into 4 banks with 2 ports: E[ceil(max/2)] = 2.07 for
    // uniform random indexes
    const IndexGrid tile = random_tile(32, 4096, 256, 42);
    const BankedBuffer buffer{4, 2, 2};
    const VqTraceResult r = trace_conventional_vq(tile, 8, buffer, 16);
    CHECK(r.cycles == oracle_cycles(tile, 8, buffer));
    CHECK(r.slowdown > 1.8);
    CHECK(r.slowdown < 2.4);
    CHECK(r.slowdown == doctest::Approx(2.072).epsilon(0.025));

    // single-ported banks, 4 lookups per cycle: E[max occupancy]/ports = 2.125
    const VqTraceResult one = trace_conventional_vq(tile, 4, BankedBuffer{4, 1, 2}, 16);
    CHECK(one.cycles == oracle_cycles(tile, 4, BankedBuffer{4, 1, 2}));
    CHECK(one.slowdown == doctest::Approx(2.125).epsilon(0.02));
}

TEST_CASE("hot/cold split marks the most frequent entries") {
    std::vector<std::uint64_t> freq = {5, 9, 9, 1, 7, 0};
    const BankMapping m = hot_cold_replicate(freq, 3);
    REQUIRE(m.hot.size() == 6);
    CHECK(m.hot[1] == 1);
    CHECK(m.hot[2] == 1);
    CHECK(m.hot[4] == 1);
    CHECK(m.hot[0] == 0);
    CHECK(m.hot[3] == 0);
    CHECK(m.hot[5] == 0);

    // ties break to the lower index
    const BankMapping tie = hot_cold_replicate({3, 3, 3, 3}, 2);
    CHECK(tie.hot[0] == 1);
    CHECK(tie.hot[1] == 1);
    CHECK(tie.hot[2] == 0);

    CHECK_THROWS_AS(hot_cold_replicate(freq, -1), ConfigError);
    CHECK_THROWS_AS(hot_cold_replicate({}, 1), DataError);
}

TEST_CASE("hot replication recovers a large share of the conflict loss") {
    const IndexGrid tile = random_tile(32, 4096, 256, 42);
    const BankedBuffer buffer{4, 1, 2};
    const VqTraceResult base = trace_conventional_vq(tile, 4, buffer, 16);

    std::vector<std::uint64_t> freq(256, 0);
    for (long r = 0; r < tile.rows(); ++r)
        for (long j = 0; j < tile.cols(); ++j) freq[tile(r, j)] += 1;

    const BankMapping half = hot_cold_replicate(freq, 128);
    const VqTraceResult rep = trace_replicated_vq(tile, 4, buffer, half, 16);
    const double speedup =
        static_cast<double>(base.cycles) / static_cast<double>(rep.cycles);
    CHECK(speedup > 1.4);
    CHECK(speedup < 2.0);

    // replicating everything removes every conflict
    const BankMapping all = hot_cold_replicate(freq, 256);
    const VqTraceResult free_run = trace_replicated_vq(tile, 4, buffer, all, 16);
    CHECK(free_run.cycles == free_run.ideal_cycles);
    CHECK(free_run.slowdown == 1.0);
    CHECK(free_run.conflict_cycles == 0);

    // a larger budget never hurts
    std::uint64_t prev = base.cycles;
    for (const long budget : {32L, 64L, 128L, 192L, 256L}) {
        const BankMapping m = hot_cold_replicate(freq, budget);
        const VqTraceResult r = trace_replicated_vq(tile, 4, buffer, m, 16);
        CHECK(r.cycles <= prev);
        prev = r.cycles;
    }
}

TEST_CASE("row-per-bank epilogue stream never stalls") {
    // one element per row, banks indexed by row: by construction conflict-free
    const VqTraceResult r = eva_epilogue_trace(32, 100, 4, BankedBuffer{4, 1, 2}, 2);
    CHECK(r.cycles == 800);  // ceil(32/4) row groups per column
    CHECK(r.ideal_cycles == 800);
    CHECK(r.slowdown == 1.0);
    CHECK(r.conflict_cycles == 0);

    const VqTraceResult wide =
        eva_epilogue_trace(32, 4096, 32, BankedBuffer{32, 1, 2}, 2);
    CHECK(wide.cycles == 4096);
    CHECK(wide.slowdown == 1.0);

    // ragged final row group still fits in one cycle
    const VqTraceResult ragged =
        eva_epilogue_trace(10, 7, 4, BankedBuffer{4, 1, 2}, 2);
    CHECK(ragged.cycles == 21);  // 3 groups per column
    CHECK(ragged.slowdown == 1.0);

    CHECK_THROWS_AS(eva_epilogue_trace(32, 16, 32, BankedBuffer{16, 1, 2}, 2),
                    ConfigError);
}

TEST_CASE("lookup traffic shrinks by the group dimension") {
    // conventional dequantization reads a full d x FP16 entry per lookup; the
    // reformulated epilogue reads one FP16 scalar
    const IndexGrid tile = random_tile(32, 128, 256, 9);
    const VqTraceResult conv =
        trace_conventional_vq(tile, 4, BankedBuffer{4, 1, 2}, 16);
    const VqTraceResult eva =
        eva_epilogue_trace(32, 128, 32, BankedBuffer{32, 1, 2}, 2);
    CHECK(conv.bytes_read == 32 * 128 * 16);
    CHECK(eva.bytes_read == 32 * 128 * 2);
    CHECK(conv.bytes_read == 8 * eva.bytes_read);
}

TEST_CASE("replicated trace validates its inputs") {
    const IndexGrid tile = random_tile(4, 8, 16, 10);
    BankMapping wrong;
    wrong.kind = MappingKind::IndexModulo;
    CHECK_THROWS_AS(trace_replicated_vq(tile, 4, BankedBuffer{4, 1, 2}, wrong, 16),
                    ConfigError);
    BankMapping small = hot_cold_replicate(std::vector<std::uint64_t>(8, 1), 2);
    // tile indexes up to 15 but the table only covers 8 entries
    CHECK_THROWS_AS(trace_replicated_vq(tile, 4, BankedBuffer{4, 1, 2}, small, 16),
                    DataError);
    IndexGrid empty;
    CHECK_THROWS_AS(trace_conventional_vq(empty, 4, BankedBuffer{4, 1, 2}, 16),
                    DataError);
    CHECK_THROWS_AS(trace_conventional_vq(tile, 0, BankedBuffer{4, 1, 2}, 16),
                    ConfigError);
}
