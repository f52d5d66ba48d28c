#include <gtest/gtest.h>

#include <algorithm>
#include <list>
#include <random>

#include "fox/cache.hpp"
#include "fox/omft.hpp"

using namespace fox;

namespace {

OmftEntry sample_entry(std::uint32_t inode = 9) {
    OmftEntry e;
    e.valid = true;
    e.inode = inode;
    e.uid = 1000;
    e.gid = 100;
    e.flag = MonitorFlag::WriteOnly;
    e.pid = 5;
    e.dir_id = 2;
    return e;
}

// Textbook LRU cache for cross-checking: one std::list per set, MRU at front.
struct OracleCache {
    std::uint64_t sets, ways;
    std::vector<std::list<std::pair<std::uint64_t, bool>>> lines;
    OracleCache(std::uint64_t s, std::uint64_t w) : sets(s), ways(w), lines(s) {}

    // Returns {hit, dirty_evicted}.
    std::pair<bool, bool> access(std::uint64_t addr, bool write) {
        const std::uint64_t block = addr / 64;
        auto& set = lines[block % sets];
        for (auto it = set.begin(); it != set.end(); ++it) {
            if (it->first == block) {
                const bool dirty = it->second || write;
                set.erase(it);
                set.emplace_front(block, dirty);
                return {true, false};
            }
        }
        bool dirty_evicted = false;
        if (set.size() == ways) {
            dirty_evicted = set.back().second;
            set.pop_back();
        }
        set.emplace_front(block, write);
        return {false, dirty_evicted};
    }
};

}  // namespace

TEST(OmftEntryCodec, SeventeenBytesLittleEndian) {
    const auto bytes = encode_omft_entry(sample_entry(0x01020304));
    ASSERT_EQ(bytes.size(), 17U);
    EXPECT_EQ(bytes[0], 0b101);  // valid, flag 10
    EXPECT_EQ(bytes[1], 0x04);
    EXPECT_EQ(bytes[4], 0x01);
    EXPECT_EQ(bytes[5], 0xE8);  // uid 1000 = 0x3E8
    EXPECT_EQ(bytes[6], 0x03);
    EXPECT_EQ(bytes[9], 100);
    EXPECT_EQ(bytes[13], 5);
    EXPECT_EQ(bytes[15], 2);
    EXPECT_EQ(decode_omft_entry(bytes), sample_entry(0x01020304));
}

TEST(Omft, InstallLookupReinstall) {
    OpenMonitorFileTable t;
    t.install(7, sample_entry(1));
    EXPECT_EQ(t.lookup(7), sample_entry(1));
    t.install(7, sample_entry(2));
    EXPECT_EQ(t.lookup(7).inode, 2U);
    EXPECT_EQ(t.valid_count(), 1U);
}

TEST(Omft, InstallAtZeroOrBeyondFails) {
    OpenMonitorFileTable t;
    try {
        t.install(0, sample_entry());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
    EXPECT_THROW(t.install(512, sample_entry()), Error);
}

TEST(Omft, Evict) {
    OpenMonitorFileTable t;
    t.install(3, sample_entry());
    t.evict(3);
    EXPECT_FALSE(t.lookup(3).valid);
    t.evict(3);
    t.evict(100);
    EXPECT_EQ(t.valid_count(), 0U);
    EXPECT_FALSE(t.lookup(0).valid);
}

TEST(Omft, DumpIsExactlyEightThousandSevenHundredFourBytes) {
    OpenMonitorFileTable t;
    EXPECT_EQ(t.dump().size(), 512U * 17U);
    EXPECT_EQ(t.dump().size(), 8704U);
    t.install(1, sample_entry(1));
    t.install(511, sample_entry(511));
    const auto bytes = t.dump();
    EXPECT_EQ(bytes.size(), 8704U);
    EXPECT_TRUE(std::all_of(bytes.begin(), bytes.begin() + 17, [](auto b) { return b == 0; }));
    EXPECT_EQ(bytes[17], 0b101);
    EXPECT_EQ(OpenMonitorFileTable::load(bytes), t);
    EXPECT_THROW((void)OpenMonitorFileTable::load(std::span(bytes).first(100)), Error);
}

TEST(Cache, ColdMissThenHit) {
    SetAssocCache c({128 * 1024, 8, 64});
    EXPECT_EQ(c.geometry().sets(), 256U);
    EXPECT_FALSE(c.access(0x1000, false).hit);
    EXPECT_TRUE(c.access(0x1010, false).hit);
    EXPECT_EQ(c.hits(), 1U);
    EXPECT_EQ(c.misses(), 1U);
}

TEST(Cache, LruEvictionWithinSet) {
    SetAssocCache c({2 * 64 * 4, 2, 64});  // 4 sets, 2 ways
    const std::uint64_t stride = 4 * 64;    // same set
    c.access(0, true);
    c.access(stride, false);
    c.access(0, false);  // 0 becomes MRU
    const auto out = c.access(2 * stride, false);
    EXPECT_FALSE(out.hit);
    ASSERT_FALSE(out.dirty_eviction.has_value());  // evicted line was clean
    EXPECT_TRUE(c.contains(0));
    EXPECT_FALSE(c.contains(stride));
    const auto out2 = c.access(3 * stride, false);
    ASSERT_TRUE(out2.dirty_eviction.has_value());
    EXPECT_EQ(*out2.dirty_eviction, 0U);
}

TEST(Cache, FlushCountsDirtyLines) {
    SetAssocCache c({64 * 1024, 8, 64});
    c.access(0, true);
    c.access(64, true);
    c.access(128, false);
    c.access(0, true);
    EXPECT_EQ(c.flush(), 2U);
    EXPECT_EQ(c.flush(), 0U);
    EXPECT_EQ(c.resident_blocks(), 3U);
}

TEST(CacheProperty, MatchesTextbookLru) {
    std::mt19937_64 rng(11);
    SetAssocCache c({8 * 1024, 4, 64});
    OracleCache o(c.geometry().sets(), 4);
    for (int i = 0; i < 50000; ++i) {
        const std::uint64_t addr = (rng() % 1024) * 64 + rng() % 64;
        const bool write = rng() % 3 == 0;
        const auto got = c.access(addr, write);
        const auto want = o.access(addr, write);
        ASSERT_EQ(got.hit, want.first) << "step " << i;
        ASSERT_EQ(got.dirty_eviction.has_value(), want.second) << "step " << i;
        ASSERT_LE(c.resident_blocks(), 8U * 1024U / 64U);
    }
    for (std::uint64_t s = 0; s < c.geometry().sets(); ++s) {
        std::vector<std::uint64_t> want;
        for (const auto& [b, d] : o.lines[s]) want.push_back(b * 64);
        EXPECT_EQ(c.lru_order(s), want);
    }
}
