#pragma once

// Random multi-process traces for property and oracle tests. Files live under
// /nvm/secret, /nvm/pub and /plain with random flags; processes come and go,
// map a few files each, and touch random byte ranges inside one 64 B block.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fox/fox.hpp"

namespace foxtest {

struct RandomTraceOptions {
    std::uint64_t seed = 0;
    std::size_t events = 10000;
    std::size_t files = 12;
    std::size_t max_live_pids = 6;
    std::uint64_t max_pages = 32;
    /// Emit "D /nvm/secret" somewhere in the first half of the trace.
    bool set_directory = true;
};

inline constexpr const char* kRandomTraceDir = "/nvm/secret";

inline fox::Trace random_trace(const RandomTraceOptions& o) {
    std::mt19937_64 rng(o.seed * 0x9E3779B97F4A7C15ULL + 1);
    auto below = [&](std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng); };
    auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

    fox::Trace t;
    t.reserve(o.events + 64);
    std::vector<std::string> paths;
    const char* dirs[] = {"/nvm/secret/", "/nvm/pub/", "/plain/"};
    for (std::size_t i = 0; i < o.files; ++i) {
        std::string p = std::string(dirs[below(3)]) + "f" + std::to_string(i) + ".dat";
        // Bias towards monitored files so records are plentiful.
        const unsigned flag = chance(0.15) ? 0u : static_cast<unsigned>(1 + below(3));
        t.emplace_back(fox::RegisterFile{p, static_cast<std::uint32_t>(below(1u << 20)),
                                         static_cast<std::uint32_t>(below(1u << 31)), fox::flag_from_bits(flag)});
        paths.push_back(std::move(p));
    }

    struct Region {
        std::uint64_t start, len;
    };
    struct Proc {
        std::vector<Region> regions;
        std::vector<std::size_t> files;
        std::uint64_t next = 0;
    };
    std::map<std::uint16_t, Proc> live;
    std::uint16_t next_pid = 1;
    const std::size_t dir_at = o.set_directory ? static_cast<std::size_t>(below(o.events / 2 + 1)) : SIZE_MAX;
    bool dir_done = false;

    auto map_one = [&](std::uint16_t pid, Proc& p) {
        if (p.files.size() == paths.size()) return;
        std::size_t f;
        do {
            f = below(paths.size());
        } while (std::find(p.files.begin(), p.files.end(), f) != p.files.end());
        const std::uint64_t length = 1 + below(o.max_pages * 4096);
        const std::uint64_t pages = (length + 4095) / 4096;
        t.emplace_back(fox::Mmap{pid, paths[f], length, chance(0.5)});
        p.regions.push_back({fox::kMmapBase + p.next, pages * 4096});
        p.files.push_back(f);
        p.next += pages * 4096;
    };

    while (t.size() < o.events) {
        if (!dir_done && t.size() >= dir_at) {
            t.emplace_back(fox::SetDir{kRandomTraceDir});
            dir_done = true;
            continue;
        }
        if (live.empty() || (live.size() < o.max_live_pids && chance(0.002))) {
            const std::uint16_t pid = next_pid++;
            Proc& p = live[pid];
            const std::size_t n = 1 + below(3);
            for (std::size_t k = 0; k < n; ++k) map_one(pid, p);
            continue;
        }
        auto it = live.begin();
        std::advance(it, static_cast<long>(below(live.size())));
        if (chance(0.0005)) {
            map_one(it->first, it->second);
            continue;
        }
        if (chance(0.0015)) {
            t.emplace_back(fox::Exit{it->first});
            live.erase(it);
            continue;
        }
        const Proc& p = it->second;
        const Region& r = p.regions[below(p.regions.size())];
        const std::uint64_t block = below(r.len / 64);
        const std::uint64_t offset = below(64);
        const auto size = static_cast<std::uint32_t>(1 + below(64 - offset));
        t.emplace_back(fox::Access{it->first, chance(0.5) ? fox::OpKind::Read : fox::OpKind::Write,
                                   r.start + block * 64 + offset, size});
    }
    for (const auto& [pid, p] : live) t.emplace_back(fox::Exit{pid});
    return t;
}

}  // namespace foxtest
