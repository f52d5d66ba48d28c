#pragma once

// Scheme runner, cost model and report generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fox/error.hpp"
#include "fox/kernel_shim.hpp"
#include "fox/log_store.hpp"
#include "fox/mem_controller.hpp"
#include "fox/scheme.hpp"
#include "fox/workload.hpp"

namespace fox {

struct CostParams {
    double read_ns = 60.0;
    double write_ns = 150.0;
    double aes_cycles = 24.0;
    double clock_ghz = 1.0;
    // Cache hit latencies in cycles; informational only in the additive model.
    double l1_cycles = 2.0;
    double l2_cycles = 20.0;
    double l3_cycles = 32.0;

    [[nodiscard]] double aes_ns() const noexcept { return aes_cycles / clock_ghz; }

    void validate() const {
        for (double v : {read_ns, write_ns, aes_cycles, clock_ghz, l1_cycles, l2_cycles, l3_cycles}) {
            if (!(v > 0.0)) throw Error(Errc::invalid_argument, "cost parameters must be strictly positive");
        }
    }
};

/// Additive service-time model:
///   reads * read_ns + writes * write_ns
///   + (data accesses + monitor-cache misses) * max(0, aes_ns - read_ns)
///   + monitor-cache hits * aes_ns
/// Pad generation overlaps the data or counter fetch, so only its excess is
/// charged. A monitor write that hits the monitor cache has no fetch to hide
/// behind and pays the full AES latency.
[[nodiscard]] inline double simulated_time(const TrafficCounters& c, const CostParams& p) noexcept {
    const double excess = std::max(0.0, p.aes_ns() - p.read_ns);
    const double reads = static_cast<double>(c.total_reads());
    const double writes = static_cast<double>(c.total_writes());
    const double data = static_cast<double>(c.data_reads + c.data_writes);
    return reads * p.read_ns + writes * p.write_ns + (data + static_cast<double>(c.mc_misses)) * excess +
           static_cast<double>(c.mc_hits) * p.aes_ns();
}

struct RunReport {
    Scheme scheme = Scheme::EncryptionBaseline;
    std::uint64_t trace_digest = 0;
    std::uint64_t memory_requests = 0;
    TrafficCounters counters;
    std::uint64_t total_nvm_writes = 0;
    std::uint64_t total_nvm_reads = 0;
    double simulated_time_ns = 0.0;
    /// Set by normalize(); a baseline run is normalized against itself.
    std::optional<double> writes_normalized_to_baseline;
    std::optional<double> throughput_normalized_to_baseline;
    bool ordering_checked = false;
    bool ordering_ok = true;
    std::uint64_t backup_events = 0;
    std::uint64_t pmt_peak = 0;
    std::uint64_t backup_pairs = 0;
    std::vector<MonitorRecord> records;

    [[nodiscard]] double throughput() const noexcept {
        return simulated_time_ns > 0.0 ? static_cast<double>(memory_requests) / simulated_time_ns : 0.0;
    }
};

/// One kernel shim + memory controller pair replaying a trace event by event.
class Simulator {
public:
    explicit Simulator(SchemeConfig scheme, ControllerConfig controller = {})
        : shim_(scheme), controller_(scheme, controller) {
        deliver();
    }

    void step(const TraceEvent& ev) {
        const LogicalTime now = ++time_;
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, RegisterFile>) {
                    shim_.register_file(e.path, e.uid, e.gid, e.flag);
                } else if constexpr (std::is_same_v<T, SetDir>) {
                    shim_.set_monitored_directory(e.path);
                } else if constexpr (std::is_same_v<T, Mmap>) {
                    shim_.dax_mmap(e.pid, e.path, e.length, e.shared, now);
                    pmt_peak_ = std::max<std::uint64_t>(pmt_peak_, shim_.pmt().occupancy());
                } else if constexpr (std::is_same_v<T, Access>) {
                    const TaggedAddress addr = shim_.translate(e.pid, e.vaddr);
                    controller_.submit(MemoryRequest{addr, e.op, e.pid, now});
                    ++requests_;
                } else {
                    shim_.handle_exit(e.pid, now);
                }
            },
            ev);
        deliver();
    }

    void run(const Trace& trace) {
        for (const auto& ev : trace) step(ev);
    }

    void finish() { controller_.finish(); }

    [[nodiscard]] KernelShim& shim() noexcept { return shim_; }
    [[nodiscard]] MemoryController& controller() noexcept { return controller_; }
    [[nodiscard]] const KernelShim& shim() const noexcept { return shim_; }
    [[nodiscard]] const MemoryController& controller() const noexcept { return controller_; }
    [[nodiscard]] LogicalTime now() const noexcept { return time_; }
    [[nodiscard]] std::uint64_t memory_requests() const noexcept { return requests_; }
    [[nodiscard]] std::uint64_t pmt_peak() const noexcept { return pmt_peak_; }

private:
    void deliver() {
        for (const auto& msg : shim_.drain_messages()) controller_.deliver(msg);
    }

    KernelShim shim_;
    MemoryController controller_;
    LogicalTime time_ = 0;
    std::uint64_t requests_ = 0;
    std::uint64_t pmt_peak_ = 0;
};

struct RunOptions {
    ControllerConfig controller;
    /// Receives backups at the threshold and a final flush of everything live.
    RecordSink* sink = nullptr;
};

[[nodiscard]] inline RunReport run_experiment(const Trace& trace, const SchemeConfig& scheme, const CostParams& params,
                                              const RunOptions& options = {}) {
    scheme.validate();
    params.validate();
    Simulator sim(scheme, options.controller);
    sim.controller().set_backup_sink(options.sink);
    sim.run(trace);
    sim.finish();
    if (options.sink) sim.controller().log().final_flush(*options.sink);

    RunReport r;
    r.scheme = scheme.scheme;
    r.trace_digest = trace_digest(trace);
    r.memory_requests = sim.memory_requests();
    r.counters = sim.controller().counters();
    r.total_nvm_writes = r.counters.total_writes();
    r.total_nvm_reads = r.counters.total_reads();
    r.simulated_time_ns = simulated_time(r.counters, params);
    r.ordering_checked = options.controller.strict_ordering;
    r.ordering_ok = !r.ordering_checked || sim.controller().ordering_ok();
    r.backup_events = sim.controller().backups().size();
    r.pmt_peak = sim.pmt_peak();
    r.backup_pairs = sim.shim().backup().map.size();
    r.records = sim.controller().emitted();
    if (scheme.scheme == Scheme::EncryptionBaseline) {
        r.writes_normalized_to_baseline = 1.0;
        r.throughput_normalized_to_baseline = 1.0;
    }
    return r;
}

namespace detail {
inline double ratio(double num, double den) noexcept {
    if (den == 0.0) return num == 0.0 ? 1.0 : HUGE_VAL;
    return num / den;
}
}  // namespace detail

/// Fills the normalized fields of report against a baseline run of the same trace.
inline void normalize(RunReport& report, const RunReport& baseline) {
    if (report.trace_digest != baseline.trace_digest) {
        throw Error(Errc::invalid_argument, "report and baseline come from different traces");
    }
    report.writes_normalized_to_baseline = detail::ratio(static_cast<double>(report.total_nvm_writes),
                                                         static_cast<double>(baseline.total_nvm_writes));
    // Same request count on both sides, so throughput ratio is a time ratio.
    report.throughput_normalized_to_baseline = detail::ratio(baseline.simulated_time_ns, report.simulated_time_ns);
}

inline constexpr std::string_view kCsvHeader =
    "scheme,data_reads,data_writes,counter_reads,counter_writes,monitor_reads,monitor_writes,total_writes,"
    "norm_writes,norm_throughput";

[[nodiscard]] inline std::string compare(std::span<const RunReport> reports, const RunReport& baseline) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& report : reports) {
        RunReport r = report;
        r.records.clear();
        normalize(r, baseline);
        const auto& c = r.counters;
        char norm[64];
        std::snprintf(norm, sizeof norm, "%.6f,%.6f", *r.writes_normalized_to_baseline,
                      *r.throughput_normalized_to_baseline);
        out << scheme_name(r.scheme) << ',' << c.data_reads << ',' << c.data_writes << ',' << c.counter_reads << ','
            << c.counter_writes << ',' << c.monitor_reads << ',' << c.monitor_writes << ',' << r.total_nvm_writes
            << ',' << norm << '\n';
    }
    return std::move(out).str();
}

}  // namespace fox
