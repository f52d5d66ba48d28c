#pragma once

// Memory-controller model: the OMFT, the Metadata Processing Module (monitor
// phase 1), the Monitor Module with its Pre-monitoring Queue and monitor cache
// (monitor phase 2), and counter-mode encryption traffic.
//
// Every data access probes the counter cache for its page's counter block.
// Monitor records are written through the monitor cache; a miss costs a
// read-before-write of the 64-byte log block plus its counter.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "fox/address.hpp"
#include "fox/cache.hpp"
#include "fox/error.hpp"
#include "fox/kernel_shim.hpp"
#include "fox/log_store.hpp"
#include "fox/omft.hpp"
#include "fox/scheme.hpp"

namespace fox {

struct TrafficCounters {
    std::uint64_t data_reads = 0;
    std::uint64_t data_writes = 0;
    std::uint64_t counter_reads = 0;
    std::uint64_t counter_writes = 0;
    std::uint64_t monitor_reads = 0;
    std::uint64_t monitor_writes = 0;
    std::uint64_t mc_hits = 0;
    std::uint64_t mc_misses = 0;
    std::uint64_t cc_hits = 0;
    std::uint64_t cc_misses = 0;

    // Diagnostics, not NVM traffic.
    std::uint64_t invalid_slot_lookups = 0;
    std::uint64_t stale_lookups = 0;
    std::uint64_t note_writes = 0;

    [[nodiscard]] std::uint64_t total_writes() const noexcept { return data_writes + counter_writes + monitor_writes; }
    [[nodiscard]] std::uint64_t total_reads() const noexcept { return data_reads + counter_reads + monitor_reads; }

    friend bool operator==(const TrafficCounters&, const TrafficCounters&) = default;
};

/// Register-S snapshot handed from the MPM to the Monitor Module.
struct PreMonitorRequest {
    TaggedAddress address;
    OpKind op = OpKind::Read;
    OmftEntry snapshot;
    LogicalTime logical_time = 0;
};

struct ControllerConfig {
    CacheGeometry counter_cache{128 * 1024, 8, 64};
    CacheGeometry monitor_cache{64 * 1024, 8, 64};
    bool strict_ordering = false;
    bool collect_records = true;
};

enum class JournalKind : std::uint8_t { DataComplete, MonitorCommit };

struct JournalEntry {
    JournalKind kind = JournalKind::DataComplete;
    LogicalTime time = 0;
};

/// True iff every monitor commit follows the completion of its data request
/// and monitor commits appear in strictly increasing logical time.
[[nodiscard]] inline bool ordering_check(std::span<const JournalEntry> journal) {
    std::unordered_set<LogicalTime> completed;
    std::optional<LogicalTime> last_commit;
    for (const auto& e : journal) {
        if (e.kind == JournalKind::DataComplete) {
            completed.insert(e.time);
            continue;
        }
        if (last_commit && e.time <= *last_commit) return false;
        if (!completed.contains(e.time)) return false;
        last_commit = e.time;
    }
    return true;
}

class MemoryController {
public:
    MemoryController(const SchemeConfig& scheme, ControllerConfig config = {})
        : layout_(scheme.layout),
          config_(config),
          counter_cache_(config.counter_cache),
          monitor_cache_(config.monitor_cache),
          log_(scheme.storage, scheme.layout) {}

    void omft_install(MonitorIndex index, const OmftEntry& entry) { omft_.install(index, entry); }
    void omft_evict(MonitorIndex index) noexcept { omft_.evict(index); }

    /// Applies one kernel message. Lifecycle notes go straight to the log.
    void deliver(const ControlMessage& msg) {
        if (const auto* ins = std::get_if<OmftInstall>(&msg)) {
            omft_install(ins->index, ins->entry);
        } else if (const auto* ev = std::get_if<OmftEvict>(&msg)) {
            omft_evict(ev->index);
        } else {
            log_.append_note(note_record(std::get<LifecycleNote>(msg)));
            ++counters_.note_writes;
            after_append();
        }
    }

    /// Counter-block address of the page holding device_address.
    [[nodiscard]] std::uint64_t counter_address(std::uint64_t device_address) const noexcept {
        return layout_.counter_region_base + (device_address / kPageSize) * kBlockSize;
    }

    CacheOutcome counter_fetch(std::uint64_t device_address, OpKind op) {
        const auto out = counter_cache_.access(counter_address(device_address), op == OpKind::Write);
        if (out.hit) {
            ++counters_.cc_hits;
        } else {
            ++counters_.cc_misses;
            ++counters_.counter_reads;
        }
        if (out.dirty_eviction) ++counters_.counter_writes;
        return out;
    }

    /// Monitor phase 1. Charges the data access and its counter fetch, then
    /// decides whether the request is monitored.
    std::optional<PreMonitorRequest> mpm_process(const MemoryRequest& req) {
        const std::uint64_t device = trim_address(req.address);
        if (req.op == OpKind::Write) {
            ++counters_.data_writes;
        } else {
            ++counters_.data_reads;
        }
        counter_fetch(device, req.op);

        const MonitorIndex index = extract_metabits(req.address);
        if (index == 0) return std::nullopt;
        const OmftEntry& entry = omft_.lookup(index);
        if (!entry.valid) {
            ++counters_.invalid_slot_lookups;
            return std::nullopt;
        }
        if (entry.pid != req.pid) {
            ++counters_.stale_lookups;
            return std::nullopt;
        }
        if (!matches(entry.flag, req.op)) return std::nullopt;
        return PreMonitorRequest{req.address, req.op, entry, req.logical_time};
    }

    /// Monitor phase 2: read-before-write of the log block unless the monitor
    /// cache holds it, then the monitor write itself.
    MonitorRecord mm_commit(const PreMonitorRequest& pre) {
        const std::uint64_t device = trim_address(pre.address);
        std::uint64_t log_addr = 0;
        try {
            log_addr = log_.next_log_address(device);
        } catch (const Error& e) {
            throw Error(Errc::resource_exhausted, std::string("no monitor log space: ") + e.what());
        }
        const std::uint64_t log_block = log_addr - log_addr % kBlockSize;

        const auto probe = monitor_cache_.access(log_block, false);
        if (probe.hit) {
            ++counters_.mc_hits;
        } else {
            ++counters_.mc_misses;
            ++counters_.monitor_reads;
            counter_fetch(log_block, OpKind::Read);
        }

        MonitorRecord rec;
        rec.block_address = device;
        rec.uid = pre.snapshot.uid;
        rec.gid = pre.snapshot.gid;
        rec.op = pre.op;
        rec.timestamp = pre.logical_time;
        rec.inode = pre.snapshot.inode;
        rec.dir_id = pre.snapshot.dir_id;
        rec.pid = pre.snapshot.pid;

        log_.append_monitor(rec);
        ++counters_.monitor_writes;
        counter_fetch(log_block, OpKind::Write);
        if (config_.strict_ordering) journal_.push_back({JournalKind::MonitorCommit, pre.logical_time});
        if (config_.collect_records) emitted_.push_back(rec);
        after_append();
        return rec;
    }

    /// Full path for one request: data + counter, MPM, PAQ, Monitor Module.
    void submit(const MemoryRequest& req) {
        if (last_time_ && req.logical_time <= *last_time_) {
            throw Error(Errc::invalid_argument, "memory requests must arrive in increasing logical time");
        }
        last_time_ = req.logical_time;
        auto pre = mpm_process(req);
        if (config_.strict_ordering) journal_.push_back({JournalKind::DataComplete, req.logical_time});
        if (pre) paq_.push_back(*pre);
        drain_paq();
    }

    void drain_paq() {
        while (!paq_.empty()) {
            const PreMonitorRequest pre = paq_.front();
            paq_.pop_front();
            mm_commit(pre);
        }
    }

    /// End of run: write back dirty counter blocks.
    void finish() {
        drain_paq();
        counters_.counter_writes += counter_cache_.flush();
    }

    void set_backup_sink(RecordSink* sink) noexcept { sink_ = sink; }

    [[nodiscard]] bool ordering_ok() const { return ordering_check(journal_); }

    [[nodiscard]] const TrafficCounters& counters() const noexcept { return counters_; }
    [[nodiscard]] const OpenMonitorFileTable& omft() const noexcept { return omft_; }
    [[nodiscard]] const LogStore& log() const noexcept { return log_; }
    [[nodiscard]] LogStore& log() noexcept { return log_; }
    [[nodiscard]] const std::vector<JournalEntry>& journal() const noexcept { return journal_; }
    [[nodiscard]] const std::vector<MonitorRecord>& emitted() const noexcept { return emitted_; }
    [[nodiscard]] const std::vector<BackupEvent>& backups() const noexcept { return backups_; }
    [[nodiscard]] const SetAssocCache& monitor_cache() const noexcept { return monitor_cache_; }
    [[nodiscard]] const SetAssocCache& counter_cache() const noexcept { return counter_cache_; }

private:
    void after_append() {
        if (!sink_) return;
        if (auto ev = log_.maybe_trigger_backup(*sink_)) backups_.push_back(*ev);
    }

    MemoryLayout layout_;
    ControllerConfig config_;
    OpenMonitorFileTable omft_;
    SetAssocCache counter_cache_;
    SetAssocCache monitor_cache_;
    LogStore log_;
    std::deque<PreMonitorRequest> paq_;
    TrafficCounters counters_;
    std::vector<JournalEntry> journal_;
    std::vector<MonitorRecord> emitted_;
    std::vector<BackupEvent> backups_;
    RecordSink* sink_ = nullptr;
    std::optional<LogicalTime> last_time_;
};

}  // namespace fox
