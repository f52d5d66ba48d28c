#include <gtest/gtest.h>

#include <random>

#include "fox/mem_controller.hpp"
#include "fox/metrics.hpp"
#include "support/random_trace.hpp"

using namespace fox;

namespace {

SchemeConfig scheme_cfg(StorageKind kind = StorageKind::GlobalCircular) {
    SchemeConfig c;
    c.scheme = Scheme::FullRW;
    c.storage.kind = kind;
    return c;
}

OmftEntry entry(MonitorFlag flag, Pid pid = 5) {
    OmftEntry e;
    e.valid = true;
    e.inode = 9;
    e.uid = 1000;
    e.gid = 100;
    e.flag = flag;
    e.pid = pid;
    e.dir_id = 3;
    return e;
}

MemoryRequest req(std::uint64_t device, MonitorIndex idx, OpKind op, Pid pid, LogicalTime t) {
    return MemoryRequest{encode_metabits(device, idx), op, pid, t};
}

}  // namespace

TEST(Mpm, WriteOnlyFlagMatchesWrite) {
    MemoryController mc(scheme_cfg());
    mc.omft_install(7, entry(MonitorFlag::WriteOnly));
    const auto pre = mc.mpm_process(req(0x1000, 7, OpKind::Write, 5, 1));
    ASSERT_TRUE(pre.has_value());
    EXPECT_EQ(pre->snapshot.inode, 9U);
    EXPECT_EQ(pre->logical_time, 1U);
}

TEST(Mpm, WriteOnlyFlagIgnoresRead) {
    MemoryController mc(scheme_cfg());
    mc.omft_install(7, entry(MonitorFlag::WriteOnly));
    EXPECT_FALSE(mc.mpm_process(req(0x1000, 7, OpKind::Read, 5, 1)).has_value());
    EXPECT_EQ(mc.counters().data_reads, 1U);
}

TEST(Mpm, ZeroMetabitsUnmonitored) {
    MemoryController mc(scheme_cfg());
    mc.omft_install(1, entry(MonitorFlag::ReadWrite));
    EXPECT_FALSE(mc.mpm_process(req(0x1000, 0, OpKind::Write, 5, 1)).has_value());
    EXPECT_EQ(mc.counters().data_writes, 1U);
    EXPECT_EQ(mc.counters().cc_misses, 1U);
}

TEST(Mpm, InvalidSlotAndStalePid) {
    MemoryController mc(scheme_cfg());
    EXPECT_FALSE(mc.mpm_process(req(0x1000, 4, OpKind::Write, 5, 1)).has_value());
    EXPECT_EQ(mc.counters().invalid_slot_lookups, 1U);
    mc.omft_install(4, entry(MonitorFlag::ReadWrite, 6));
    EXPECT_FALSE(mc.mpm_process(req(0x1000, 4, OpKind::Write, 5, 2)).has_value());
    EXPECT_EQ(mc.counters().stale_lookups, 1U);
    mc.omft_evict(4);
    EXPECT_FALSE(mc.mpm_process(req(0x1000, 4, OpKind::Write, 6, 3)).has_value());
    EXPECT_EQ(mc.counters().invalid_slot_lookups, 2U);
}

TEST(CounterFetch, ColdMissThenHit) {
    MemoryController mc(scheme_cfg());
    EXPECT_FALSE(mc.counter_fetch(0x1000, OpKind::Read).hit);
    EXPECT_EQ(mc.counters().counter_reads, 1U);
    EXPECT_TRUE(mc.counter_fetch(0x1000, OpKind::Read).hit);
    // Same 4 KiB page shares the counter block.
    EXPECT_TRUE(mc.counter_fetch(0x1FC0, OpKind::Read).hit);
    EXPECT_EQ(mc.counters().cc_hits, 2U);
    EXPECT_EQ(mc.counter_address(0x1000), (std::uint64_t{1} << 44) + 64);
}

TEST(CounterFetch, WriteEventuallyChargesCounterWrite) {
    MemoryController mc(scheme_cfg());
    mc.counter_fetch(0x1000, OpKind::Write);
    EXPECT_EQ(mc.counters().counter_writes, 0U);
    mc.finish();
    EXPECT_EQ(mc.counters().counter_writes, 1U);
}

TEST(CounterFetch, DirtyEvictionMatchesCacheOracle) {
    // Replays the same counter-block sequence through an independent cache.
    ControllerConfig cc;
    cc.counter_cache = {4 * 64 * 2, 2, 64};
    MemoryController mc(scheme_cfg(), cc);
    SetAssocCache oracle({4 * 64 * 2, 2, 64});
    std::mt19937_64 rng(5);
    std::uint64_t reads = 0, writes = 0;
    for (int i = 0; i < 5000; ++i) {
        const std::uint64_t dev = (rng() % 64) * kPageSize + rng() % kPageSize;
        const auto op = rng() % 2 ? OpKind::Write : OpKind::Read;
        mc.counter_fetch(dev, op);
        const auto o = oracle.access((std::uint64_t{1} << 44) + dev / kPageSize * 64, op == OpKind::Write);
        reads += o.hit ? 0 : 1;
        writes += o.dirty_eviction ? 1 : 0;
    }
    EXPECT_EQ(mc.counters().counter_reads, reads);
    EXPECT_EQ(mc.counters().counter_writes, writes);
    mc.finish();
    EXPECT_EQ(mc.counters().counter_writes, writes + oracle.flush());
}

TEST(MmCommit, FirstWriteMissesSecondHitsFixedLocation) {
    MemoryController mc(scheme_cfg(StorageKind::FixedLocation));
    mc.omft_install(2, entry(MonitorFlag::ReadWrite));
    mc.submit(req(0x40, 2, OpKind::Write, 5, 1));
    EXPECT_EQ(mc.counters().monitor_reads, 1U);
    EXPECT_EQ(mc.counters().monitor_writes, 1U);
    // Block 0x40 and 0x00 share one 64 B log line (two 32 B slots).
    mc.submit(req(0x00, 2, OpKind::Write, 5, 2));
    EXPECT_EQ(mc.counters().monitor_reads, 1U);
    EXPECT_EQ(mc.counters().monitor_writes, 2U);
    EXPECT_EQ(mc.counters().mc_hits, 1U);
}

TEST(MmCommit, RecordContentFromSnapshot) {
    MemoryController mc(scheme_cfg());
    mc.omft_install(2, entry(MonitorFlag::ReadWrite));
    mc.submit(req(0x12345, 2, OpKind::Read, 5, 17));
    ASSERT_EQ(mc.emitted().size(), 1U);
    const auto& r = mc.emitted()[0];
    EXPECT_EQ(r.block_address, 0x12345U);
    EXPECT_EQ(r.uid, 1000U);
    EXPECT_EQ(r.gid, 100U);
    EXPECT_EQ(r.op, OpKind::Read);
    EXPECT_EQ(r.timestamp, 17U);
    EXPECT_EQ(r.inode, 9U);
    EXPECT_EQ(r.dir_id, 3);
    EXPECT_EQ(r.pid, 5);
    EXPECT_EQ(mc.log().live().size(), 1U);
}

TEST(MmCommit, FixedLocationOutsideDataRegionIsResourceExhausted) {
    MemoryController mc(scheme_cfg(StorageKind::FixedLocation));
    mc.omft_install(2, entry(MonitorFlag::ReadWrite));
    try {
        mc.submit(req(17 * kGiB, 2, OpKind::Write, 5, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::resource_exhausted);
    }
}

TEST(Submit, RejectsNonIncreasingTime) {
    MemoryController mc(scheme_cfg());
    mc.submit(req(0, 0, OpKind::Read, 1, 5));
    EXPECT_THROW(mc.submit(req(0, 0, OpKind::Read, 1, 5)), Error);
}

TEST(Ordering, ValidRunPasses) {
    ControllerConfig cc;
    cc.strict_ordering = true;
    MemoryController mc(scheme_cfg(), cc);
    mc.omft_install(1, entry(MonitorFlag::ReadWrite, 1));
    for (LogicalTime t = 1; t <= 100; ++t) mc.submit(req(t * 64, t % 2 ? 1 : 0, OpKind::Write, 1, t));
    EXPECT_TRUE(mc.ordering_ok());
    EXPECT_EQ(mc.journal().size(), 150U);
}

TEST(Ordering, ReorderedJournalFails) {
    std::vector<JournalEntry> j{{JournalKind::MonitorCommit, 1}, {JournalKind::DataComplete, 1}};
    EXPECT_FALSE(ordering_check(j));
    std::vector<JournalEntry> k{{JournalKind::DataComplete, 1},
                                {JournalKind::DataComplete, 2},
                                {JournalKind::MonitorCommit, 2},
                                {JournalKind::MonitorCommit, 1}};
    EXPECT_FALSE(ordering_check(k));
    std::vector<JournalEntry> ok{{JournalKind::DataComplete, 1}, {JournalKind::MonitorCommit, 1}};
    EXPECT_TRUE(ordering_check(ok));
}

TEST(ControllerProperty, ConservationAndCacheSanity) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto trace = foxtest::random_trace({seed, 20000});
        for (auto kind : {StorageKind::GlobalCircular, StorageKind::FixedLocation}) {
            auto c = scheme_cfg(kind);
            ControllerConfig cc;
            cc.strict_ordering = true;
            Simulator sim(c, cc);
            sim.run(trace);
            sim.finish();
            const auto& k = sim.controller().counters();
            std::uint64_t writes = 0;
            for (const auto& ev : trace) {
                if (const auto* a = std::get_if<Access>(&ev)) writes += a->op == OpKind::Write ? 1 : 0;
            }
            EXPECT_EQ(k.data_writes, writes);
            EXPECT_EQ(k.monitor_writes, sim.controller().emitted().size());
            EXPECT_EQ(k.mc_hits + k.mc_misses, k.monitor_writes);
            EXPECT_EQ(k.monitor_reads, k.mc_misses);
            EXPECT_EQ(k.cc_hits + k.cc_misses, k.data_reads + k.data_writes + k.monitor_writes + k.mc_misses);
            EXPECT_TRUE(sim.controller().ordering_ok());
        }
    }
}

TEST(ControllerProperty, CountersMonotone) {
    const auto trace = foxtest::random_trace({77, 5000});
    Simulator sim(scheme_cfg());
    TrafficCounters prev;
    for (const auto& ev : trace) {
        sim.step(ev);
        const auto& k = sim.controller().counters();
        EXPECT_GE(k.data_reads, prev.data_reads);
        EXPECT_GE(k.data_writes, prev.data_writes);
        EXPECT_GE(k.counter_reads, prev.counter_reads);
        EXPECT_GE(k.counter_writes, prev.counter_writes);
        EXPECT_GE(k.monitor_reads, prev.monitor_reads);
        EXPECT_GE(k.monitor_writes, prev.monitor_writes);
        EXPECT_GE(k.mc_hits, prev.mc_hits);
        EXPECT_GE(k.mc_misses, prev.mc_misses);
        EXPECT_GE(k.cc_hits, prev.cc_hits);
        EXPECT_GE(k.cc_misses, prev.cc_misses);
        prev = k;
    }
}

TEST(ControllerProperty, SnapshotsEqualAcrossIdenticalRuns) {
    const auto trace = foxtest::random_trace({8, 8000});
    Simulator a(scheme_cfg()), b(scheme_cfg());
    a.run(trace);
    b.run(trace);
    EXPECT_EQ(a.controller().counters(), b.controller().counters());
    EXPECT_EQ(a.controller().omft(), b.controller().omft());
    EXPECT_EQ(a.controller().omft().dump(), b.controller().omft().dump());
    EXPECT_EQ(a.controller().emitted(), b.controller().emitted());
}
