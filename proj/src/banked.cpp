#include "eva/banked.hpp"

#include <algorithm>
#include <numeric>

namespace eva {

namespace {

void check_buffer(const BankedBuffer& buffer) {
    if (buffer.num_banks < 1) throw ConfigError("banked: num_banks must be >= 1");
    if (buffer.ports_per_bank < 1)
        throw ConfigError("banked: ports_per_bank must be >= 1");
    if (buffer.word_bytes < 1) throw ConfigError("banked: word_bytes must be >= 1");
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Batches of row-major index-tile lookups, lookups_per_cycle at a time.
std::vector<AccessBatch> tile_batches(const IndexGrid& tile, int lookups_per_cycle,
                                      int num_banks) {
    std::vector<AccessBatch> batches;
    AccessBatch current;
    current.accesses.reserve(lookups_per_cycle);
    for (long r = 0; r < tile.rows(); ++r)
        for (long j = 0; j < tile.cols(); ++j) {
            const long idx = tile(r, j);
            current.accesses.push_back(
                {static_cast<int>(idx % num_banks), idx / num_banks});
            if (static_cast<int>(current.accesses.size()) == lookups_per_cycle) {
                batches.push_back(std::move(current));
                current = AccessBatch{};
                current.accesses.reserve(lookups_per_cycle);
            }
        }
    if (!current.accesses.empty()) batches.push_back(std::move(current));
    return batches;
}

}  // namespace

ScheduleResult schedule(const std::vector<AccessBatch>& batches,
                        const BankedBuffer& buffer, std::vector<TraceRow>* trace) {
    check_buffer(buffer);
    ScheduleResult result;
    std::vector<std::uint64_t> occupancy(buffer.num_banks);
    for (const auto& batch : batches) {
        std::fill(occupancy.begin(), occupancy.end(), 0);
        std::uint64_t max_occ = 0;
        for (const auto& a : batch.accesses) {
            if (a.bank < 0 || a.bank >= buffer.num_banks)
                throw DataError("schedule: bank id out of range");
            if (trace) {
                // a bank port pair serves ports_per_bank requests per cycle, FIFO
                const std::uint64_t slot = occupancy[a.bank] / buffer.ports_per_bank;
                trace->push_back({result.cycles + slot, a.bank, a.address, slot > 0});
            }
            occupancy[a.bank] += 1;
            max_occ = std::max(max_occ, occupancy[a.bank]);
        }
        const std::uint64_t batch_cycles =
            std::max<std::uint64_t>(1, ceil_div(max_occ, buffer.ports_per_bank));
        result.cycles += batch_cycles;
        result.conflict_cycles += batch_cycles - 1;
    }
    return result;
}

BankMapping hot_cold_replicate(const std::vector<std::uint64_t>& access_frequency,
                               long budget) {
    if (budget < 0) throw ConfigError("replicate: negative budget");
    const long entries = static_cast<long>(access_frequency.size());
    if (entries < 1) throw DataError("replicate: empty frequency table");

    std::vector<long> order(entries);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
        return access_frequency[a] > access_frequency[b];
    });

    BankMapping mapping;
    mapping.kind = MappingKind::ReplicatedHot;
    mapping.hot.assign(entries, 0);
    const long take = std::min(budget, entries);
    for (long i = 0; i < take; ++i) mapping.hot[order[i]] = 1;
    return mapping;
}

VqTraceResult trace_conventional_vq(const IndexGrid& tile, int lookups_per_cycle,
                                    const BankedBuffer& buffer, int entry_bytes,
                                    std::vector<TraceRow>* trace) {
    check_buffer(buffer);
    if (lookups_per_cycle < 1)
        throw ConfigError("trace: lookups_per_cycle must be >= 1");
    if (tile.size() == 0) throw DataError("trace: empty index tile");
    if (entry_bytes < 1) throw ConfigError("trace: entry_bytes must be >= 1");

    const auto batches = tile_batches(tile, lookups_per_cycle, buffer.num_banks);
    const ScheduleResult sched = schedule(batches, buffer, trace);

    VqTraceResult result;
    result.cycles = sched.cycles;
    result.ideal_cycles = batches.size();
    result.conflict_cycles = sched.conflict_cycles;
    result.slowdown = static_cast<double>(result.cycles) / result.ideal_cycles;
    result.bytes_read =
        static_cast<std::uint64_t>(tile.size()) * static_cast<std::uint64_t>(entry_bytes);
    return result;
}

VqTraceResult trace_replicated_vq(const IndexGrid& tile, int lookups_per_cycle,
                                  const BankedBuffer& buffer,
                                  const BankMapping& mapping, int entry_bytes) {
    check_buffer(buffer);
    if (mapping.kind != MappingKind::ReplicatedHot)
        throw ConfigError("trace: mapping is not replicated-hot");
    if (lookups_per_cycle < 1)
        throw ConfigError("trace: lookups_per_cycle must be >= 1");
    if (tile.size() == 0) throw DataError("trace: empty index tile");
    if (entry_bytes < 1) throw ConfigError("trace: entry_bytes must be >= 1");

    const long entries = static_cast<long>(mapping.hot.size());
    std::vector<std::uint64_t> occupancy(buffer.num_banks);
    std::uint64_t flexible = 0, cold_total = 0, max_occ = 0;
    long in_batch = 0;

    VqTraceResult result;
    const auto close_batch = [&]() {
        // hot requests can go to any bank, so the makespan is the dedicated
        // worst case or the fully packed bound, whichever is larger
        const std::uint64_t packed =
            ceil_div(cold_total + flexible,
                     static_cast<std::uint64_t>(buffer.num_banks) * buffer.ports_per_bank);
        const std::uint64_t dedicated = ceil_div(max_occ, buffer.ports_per_bank);
        const std::uint64_t cycles = std::max<std::uint64_t>(
            1, std::max(packed, dedicated));
        result.cycles += cycles;
        result.ideal_cycles += 1;
        std::fill(occupancy.begin(), occupancy.end(), 0);
        flexible = cold_total = max_occ = 0;
        in_batch = 0;
    };

    for (long r = 0; r < tile.rows(); ++r)
        for (long j = 0; j < tile.cols(); ++j) {
            const long idx = tile(r, j);
            if (idx >= entries) throw DataError("trace: index outside frequency table");
            if (mapping.hot[idx]) {
                flexible += 1;
            } else {
                const int bank = static_cast<int>(idx % buffer.num_banks);
                occupancy[bank] += 1;
                cold_total += 1;
                max_occ = std::max(max_occ, occupancy[bank]);
            }
            if (++in_batch == lookups_per_cycle) close_batch();
        }
    if (in_batch > 0) close_batch();

    result.conflict_cycles = result.cycles - result.ideal_cycles;
    result.slowdown = static_cast<double>(result.cycles) / result.ideal_cycles;
    result.bytes_read =
        static_cast<std::uint64_t>(tile.size()) * static_cast<std::uint64_t>(entry_bytes);
    return result;
}

VqTraceResult eva_epilogue_trace(int rows, long columns, int rows_per_cycle,
                                 const BankedBuffer& buffer, int elem_bytes) {
    check_buffer(buffer);
    if (rows < 1 || columns < 1) throw DataError("trace: empty epilogue stream");
    if (rows_per_cycle < 1)
        throw ConfigError("trace: rows_per_cycle must be >= 1");
    if (buffer.num_banks < rows_per_cycle)
        throw ConfigError("trace: row-per-bank mapping needs num_banks >= rows_per_cycle");
    if (elem_bytes < 1) throw ConfigError("trace: elem_bytes must be >= 1");

    const long row_groups = (rows + rows_per_cycle - 1) / rows_per_cycle;
    // every column walks the row groups; accesses within a group hit distinct banks
    std::vector<AccessBatch> batches;
    batches.reserve(static_cast<std::size_t>(row_groups));
    for (long grp = 0; grp < row_groups; ++grp) {
        AccessBatch batch;
        const long r_end = std::min<long>(rows, (grp + 1) * rows_per_cycle);
        for (long r = grp * rows_per_cycle; r < r_end; ++r)
            batch.accesses.push_back({static_cast<int>(r % buffer.num_banks), 0});
        batches.push_back(std::move(batch));
    }
    const ScheduleResult per_column = schedule(batches, buffer);

    VqTraceResult result;
    result.cycles = per_column.cycles * static_cast<std::uint64_t>(columns);
    result.ideal_cycles = static_cast<std::uint64_t>(row_groups) * columns;
    result.conflict_cycles =
        per_column.conflict_cycles * static_cast<std::uint64_t>(columns);
    result.slowdown = static_cast<double>(result.cycles) / result.ideal_cycles;
    result.bytes_read = static_cast<std::uint64_t>(rows) * columns * elem_bytes;
    return result;
}

}  // namespace eva
