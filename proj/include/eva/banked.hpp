#pragma once

#include <cstdint>
#include <vector>

#include "eva/error.hpp"
#include "eva/vq.hpp"

namespace eva {

// SRAM organized as independently addressable banks. Each bank serves
// ports_per_bank requests per cycle; same-value requests do not merge.
struct BankedBuffer {
    int num_banks = 4;
    int ports_per_bank = 1;
    int word_bytes = 2;
};

struct BankAccess {
    int bank = 0;
    long address = 0;
};

// Requests that want to complete in the same cycle.
struct AccessBatch {
    std::vector<BankAccess> accesses;
};

struct TraceRow {
    std::uint64_t cycle = 0;
    int bank = 0;
    long address = 0;
    bool stalled = false;  // served later than the batch's first cycle
};

struct ScheduleResult {
    std::uint64_t cycles = 0;
    std::uint64_t conflict_cycles = 0;  // cycles - batches
};

// Serializes each batch: a batch costs ceil(max per-bank occupancy / ports) cycles.
// Pass a trace sink to get a per-access (cycle, bank, address, stalled) dump.
ScheduleResult schedule(const std::vector<AccessBatch>& batches,
                        const BankedBuffer& buffer,
                        std::vector<TraceRow>* trace = nullptr);

enum class MappingKind { IndexModulo, RowDedicated, ReplicatedHot };

struct BankMapping {
    MappingKind kind = MappingKind::IndexModulo;
    std::vector<std::uint8_t> hot;  // per codebook entry; only for ReplicatedHot
};

// Pick the `budget` most-accessed entries (ties to the lower index) for
// replication into every bank; replicated entries can be served from any bank.
BankMapping hot_cold_replicate(const std::vector<std::uint64_t>& access_frequency,
                               long budget);

struct VqTraceResult {
    std::uint64_t cycles = 0;
    std::uint64_t ideal_cycles = 0;     // one cycle per batch
    std::uint64_t conflict_cycles = 0;  // cycles - ideal_cycles
    double slowdown = 1.0;              // cycles / ideal_cycles
    std::uint64_t bytes_read = 0;
};

// Conventional dequantizer lookup stream: the index tile is walked row-major in
// chunks of lookups_per_cycle, each index mapping to bank (index % num_banks).
// Every lookup reads one full codebook entry (entry_bytes).
VqTraceResult trace_conventional_vq(const IndexGrid& tile, int lookups_per_cycle,
                                    const BankedBuffer& buffer, int entry_bytes,
                                    std::vector<TraceRow>* trace = nullptr);

// Same stream with hot entries replicated in every bank: a hot request fills any
// free bank port, cold requests stay pinned to (index % num_banks).
VqTraceResult trace_replicated_vq(const IndexGrid& tile, int lookups_per_cycle,
                                  const BankedBuffer& buffer,
                                  const BankMapping& mapping, int entry_bytes);

// Output-codebook epilogue stream under the row-per-bank mapping: each cycle reads
// rows_per_cycle consecutive rows (bank = row % num_banks, one element each), for
// ceil(rows/rows_per_cycle) cycles per column. Requires num_banks >= rows_per_cycle;
// the result is measured, and lands at slowdown exactly 1.
VqTraceResult eva_epilogue_trace(int rows, long columns, int rows_per_cycle,
                                 const BankedBuffer& buffer, int elem_bytes);

}  // namespace eva
