#include <gtest/gtest.h>

#include "fox/config.hpp"
#include "fox/metrics.hpp"
#include "support/random_trace.hpp"
#include "support/reference_monitor.hpp"

using namespace fox;

namespace {

SchemeConfig with(Scheme s) {
    SchemeConfig c;
    c.scheme = s;
    if (s == Scheme::Directory) c.monitored_dir = foxtest::kRandomTraceDir;
    return c;
}

Trace all_monitored_write_only(std::uint64_t events) {
    GeneratorSpec g;
    g.rw_ratio = 0.0;
    g.event_count = events;
    return generate(g);
}

}  // namespace

TEST(SimulatedTime, ReadAndWriteLatencies) {
    TrafficCounters c;
    c.counter_reads = 1;
    EXPECT_DOUBLE_EQ(simulated_time(c, {}), 60.0);
    TrafficCounters w;
    w.counter_writes = 2;
    EXPECT_DOUBLE_EQ(simulated_time(w, {}), 300.0);
}

TEST(SimulatedTime, MonitoredWriteStrictlyIncreasesTime) {
    TrafficCounters c;
    c.data_writes = 10;
    c.data_reads = 10;
    const double before = simulated_time(c, {});
    c.monitor_writes += 1;
    c.mc_hits += 1;
    EXPECT_GT(simulated_time(c, {}), before);
}

TEST(SimulatedTime, AesExcessOnlyWhenSlowerThanFetch) {
    TrafficCounters c;
    c.data_reads = 1;
    CostParams p;
    EXPECT_DOUBLE_EQ(simulated_time(c, p), 60.0);
    p.aes_cycles = 100;
    EXPECT_DOUBLE_EQ(simulated_time(c, p), 100.0);
    c.mc_hits = 1;
    EXPECT_DOUBLE_EQ(simulated_time(c, p), 200.0);
}

TEST(SimulatedTimeProperty, MonotoneInEveryCounter) {
    TrafficCounters base;
    base.data_reads = base.data_writes = base.counter_reads = base.counter_writes = 5;
    base.monitor_reads = base.monitor_writes = base.mc_hits = base.mc_misses = 5;
    const double t0 = simulated_time(base, {});
    // NVM traffic always costs time; AES-only terms may be hidden by the fetch.
    std::uint64_t TrafficCounters::*traffic[] = {&TrafficCounters::data_reads,    &TrafficCounters::data_writes,
                                                 &TrafficCounters::counter_reads, &TrafficCounters::counter_writes,
                                                 &TrafficCounters::monitor_reads, &TrafficCounters::monitor_writes};
    for (auto f : traffic) {
        auto c = base;
        c.*f += 1;
        EXPECT_GT(simulated_time(c, {}), t0);
    }
    for (auto f : {&TrafficCounters::mc_hits, &TrafficCounters::mc_misses}) {
        auto c = base;
        c.*f += 1;
        EXPECT_GE(simulated_time(c, {}), t0);
    }
}

TEST(CostParams, RejectNonPositive) {
    CostParams p;
    p.read_ns = 0;
    EXPECT_THROW(p.validate(), Error);
}

TEST(RunExperiment, BaselineHasNoMonitorTraffic) {
    const auto t = foxtest::random_trace({1, 5000});
    const auto r = run_experiment(t, with(Scheme::EncryptionBaseline), {});
    EXPECT_EQ(r.counters.monitor_writes, 0U);
    EXPECT_EQ(r.counters.monitor_reads, 0U);
    EXPECT_EQ(*r.writes_normalized_to_baseline, 1.0);
    EXPECT_EQ(*r.throughput_normalized_to_baseline, 1.0);
}

TEST(RunExperiment, FullRwOnWriteOnlyTraceMonitorsEveryWrite) {
    const auto t = all_monitored_write_only(3000);
    const auto r = run_experiment(t, with(Scheme::FullRW), {});
    EXPECT_EQ(r.counters.monitor_writes, r.counters.data_writes);
    const auto ref = foxtest::reference_monitor(t, with(Scheme::FullRW));
    EXPECT_EQ(r.counters.monitor_writes, ref.records.size());
}

TEST(RunExperiment, SpecLikeUnderPersistWHasNoMonitorWrites) {
    GeneratorSpec g;
    g.kind = GeneratorKind::SpecLike;
    g.event_count = 5000;
    const auto r = run_experiment(generate(g), with(Scheme::PersistW), {});
    EXPECT_EQ(r.counters.monitor_writes, 0U);
}

TEST(RunExperiment, WriteDecompositionHolds) {
    const auto t = foxtest::random_trace({2, 8000});
    for (auto s : kAllSchemes) {
        const auto r = run_experiment(t, with(s), {});
        EXPECT_EQ(r.total_nvm_writes, r.counters.data_writes + r.counters.counter_writes + r.counters.monitor_writes);
        EXPECT_EQ(r.total_nvm_reads, r.counters.data_reads + r.counters.counter_reads + r.counters.monitor_reads);
    }
}

TEST(RunExperiment, DirectorySchemeNeedsDirectory) {
    SchemeConfig c;
    c.scheme = Scheme::Directory;
    EXPECT_THROW((void)run_experiment({}, c, {}), Error);
}

TEST(Compare, BaselineRowIsOneOne) {
    const auto t = foxtest::random_trace({3, 5000});
    const auto base = run_experiment(t, with(Scheme::EncryptionBaseline), {});
    const auto full = run_experiment(t, with(Scheme::FullRW), {});
    const auto persist = run_experiment(t, with(Scheme::PersistRW), {});
    const auto fullw = run_experiment(t, with(Scheme::FullW), {});
    std::vector<RunReport> rows{base, full, persist, fullw};
    const auto csv = compare(rows, base);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, std::string(kCsvHeader));
    std::getline(in, line);
    EXPECT_TRUE(line.starts_with("baseline,"));
    EXPECT_TRUE(line.ends_with(",1.000000,1.000000"));

    auto f = full, p = persist, w = fullw;
    normalize(f, base);
    normalize(p, base);
    normalize(w, base);
    EXPECT_GE(*f.writes_normalized_to_baseline, *p.writes_normalized_to_baseline);
    EXPECT_GE(*f.writes_normalized_to_baseline, *w.writes_normalized_to_baseline);
    EXPECT_EQ(compare(rows, base), csv);
}

TEST(Compare, MismatchedTracesRejected) {
    const auto a = run_experiment(foxtest::random_trace({4, 1000}), with(Scheme::EncryptionBaseline), {});
    const auto b = run_experiment(foxtest::random_trace({5, 1000}), with(Scheme::FullRW), {});
    std::vector<RunReport> rows{b};
    EXPECT_THROW((void)compare(rows, a), Error);
}

TEST(Config, ParsesAllKeys) {
    const auto cfg = parse_config(R"(# experiment
scheme = directory
storage = fixed
circular_capacity = 1M
backup_threshold = 0.25
note_capacity = 0x100
memory_size = 32G
nvm_window_base = 16G
nvm_window_size = 16G
nvm_mount = /pmem
monitored_dir = /pmem/secret
read_ns = 50
write_ns = 100.5
aes_cycles = 40
clock_ghz = 2
monitor_cache_bytes = 32K
monitor_cache_ways = 4
counter_cache_bytes = 256K
counter_cache_ways = 16
strict_ordering = true
)");
    EXPECT_EQ(cfg.scheme.scheme, Scheme::Directory);
    EXPECT_EQ(cfg.scheme.storage.kind, StorageKind::FixedLocation);
    EXPECT_EQ(cfg.scheme.storage.circular_capacity, 1U << 20);
    EXPECT_DOUBLE_EQ(cfg.scheme.storage.backup_threshold, 0.25);
    EXPECT_EQ(cfg.scheme.storage.note_capacity, 256U);
    EXPECT_EQ(cfg.scheme.layout.memory_size, 32 * kGiB);
    EXPECT_EQ(cfg.scheme.layout.nvm_window.base, 16 * kGiB);
    EXPECT_EQ(cfg.scheme.layout.nvm_window.size, 16 * kGiB);
    EXPECT_EQ(cfg.scheme.nvm_mount, "/pmem");
    EXPECT_EQ(cfg.scheme.monitored_dir, "/pmem/secret");
    EXPECT_DOUBLE_EQ(cfg.cost.read_ns, 50);
    EXPECT_DOUBLE_EQ(cfg.cost.write_ns, 100.5);
    EXPECT_DOUBLE_EQ(cfg.cost.aes_ns(), 20);
    EXPECT_EQ(cfg.controller.monitor_cache.capacity_bytes, 32U * 1024U);
    EXPECT_EQ(cfg.controller.monitor_cache.ways, 4U);
    EXPECT_EQ(cfg.controller.counter_cache.capacity_bytes, 256U * 1024U);
    EXPECT_EQ(cfg.controller.counter_cache.ways, 16U);
    EXPECT_TRUE(cfg.controller.strict_ordering);
}

TEST(Config, Errors) {
    EXPECT_THROW((void)parse_config("bogus = 1"), ParseError);
    EXPECT_THROW((void)parse_config("scheme"), ParseError);
    EXPECT_THROW((void)parse_config("read_ns = fast"), ParseError);
    EXPECT_THROW((void)parse_config("scheme = directory"), Error);
    EXPECT_THROW((void)parse_config("read_ns = -1"), Error);
    try {
        (void)parse_config("\n\nstorage = ring");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3U);
    }
}
