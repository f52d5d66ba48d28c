#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "fox/error.hpp"

namespace fox {

struct CacheGeometry {
    std::uint64_t capacity_bytes = 64 * 1024;
    std::uint32_t ways = 8;
    std::uint32_t block_bytes = 64;

    [[nodiscard]] std::uint64_t sets() const noexcept { return capacity_bytes / (std::uint64_t{ways} * block_bytes); }
};

struct CacheOutcome {
    bool hit = false;
    /// Block address of a dirty line pushed out by this access.
    std::optional<std::uint64_t> dirty_eviction;
};

/// Set-associative write-back cache with true LRU replacement. Tracks tags
/// only; no data.
class SetAssocCache {
public:
    explicit SetAssocCache(CacheGeometry geometry) : geo_(geometry) {
        if (geo_.ways == 0 || geo_.block_bytes == 0 || geo_.sets() == 0 ||
            geo_.capacity_bytes % (std::uint64_t{geo_.ways} * geo_.block_bytes) != 0) {
            throw Error(Errc::invalid_argument, "cache capacity must be a positive multiple of ways x block size");
        }
        sets_.resize(geo_.sets());
    }

    CacheOutcome access(std::uint64_t address, bool write) {
        const std::uint64_t block = address / geo_.block_bytes;
        auto& set = sets_[block % sets_.size()];
        CacheOutcome out;
        auto it = std::find_if(set.begin(), set.end(), [block](const Line& l) { return l.block == block; });
        if (it != set.end()) {
            it->dirty = it->dirty || write;
            std::rotate(set.begin(), it, it + 1);
            out.hit = true;
            ++hits_;
            return out;
        }
        ++misses_;
        if (set.size() == geo_.ways) {
            const Line& victim = set.back();
            if (victim.dirty) out.dirty_eviction = victim.block * geo_.block_bytes;
            set.pop_back();
        }
        set.insert(set.begin(), Line{block, write});
        return out;
    }

    [[nodiscard]] bool contains(std::uint64_t address) const {
        const std::uint64_t block = address / geo_.block_bytes;
        const auto& set = sets_[block % sets_.size()];
        return std::any_of(set.begin(), set.end(), [block](const Line& l) { return l.block == block; });
    }

    /// Cleans every dirty line; returns how many were written back.
    std::uint64_t flush() {
        std::uint64_t written = 0;
        for (auto& set : sets_) {
            for (auto& line : set) {
                written += line.dirty ? 1 : 0;
                line.dirty = false;
            }
        }
        return written;
    }

    [[nodiscard]] std::uint64_t resident_blocks() const noexcept {
        std::uint64_t n = 0;
        for (const auto& set : sets_) n += set.size();
        return n;
    }

    /// Resident block addresses of one set, most recently used first.
    [[nodiscard]] std::vector<std::uint64_t> lru_order(std::uint64_t set_index) const {
        std::vector<std::uint64_t> out;
        for (const auto& line : sets_.at(set_index)) out.push_back(line.block * geo_.block_bytes);
        return out;
    }

    [[nodiscard]] std::uint64_t hits() const noexcept { return hits_; }
    [[nodiscard]] std::uint64_t misses() const noexcept { return misses_; }
    [[nodiscard]] const CacheGeometry& geometry() const noexcept { return geo_; }

private:
    struct Line {
        std::uint64_t block;
        bool dirty;
    };
    CacheGeometry geo_;
    std::vector<std::vector<Line>> sets_;  // MRU first
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

}  // namespace fox
