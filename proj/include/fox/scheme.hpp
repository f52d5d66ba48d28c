#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "fox/error.hpp"

namespace fox {

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint64_t kBlockSize = 64;
inline constexpr std::uint64_t kGiB = std::uint64_t{1} << 30;

enum class Scheme {
    EncryptionBaseline,
    FullRW,
    PersistRW,
    FullW,
    PersistW,
    Directory,
};

inline constexpr std::array<Scheme, 6> kAllSchemes = {
    Scheme::EncryptionBaseline, Scheme::FullRW, Scheme::PersistRW,
    Scheme::FullW,              Scheme::PersistW, Scheme::Directory,
};

inline std::string_view scheme_name(Scheme s) noexcept {
    switch (s) {
        case Scheme::EncryptionBaseline: return "baseline";
        case Scheme::FullRW: return "full_rw";
        case Scheme::PersistRW: return "persist_rw";
        case Scheme::FullW: return "full_w";
        case Scheme::PersistW: return "persist_w";
        case Scheme::Directory: return "directory";
    }
    return "unknown";
}

inline Scheme parse_scheme(std::string_view name) {
    for (auto s : kAllSchemes) {
        if (scheme_name(s) == name) return s;
    }
    throw Error(Errc::invalid_argument, "unknown scheme '" + std::string(name) + "'");
}

[[nodiscard]] constexpr bool is_persist(Scheme s) noexcept {
    return s == Scheme::PersistRW || s == Scheme::PersistW;
}

[[nodiscard]] constexpr bool is_write_only(Scheme s) noexcept {
    return s == Scheme::FullW || s == Scheme::PersistW;
}

struct AddressRange {
    std::uint64_t base = 0;
    std::uint64_t size = 0;

    [[nodiscard]] constexpr std::uint64_t end() const noexcept { return base + size; }
    [[nodiscard]] constexpr bool contains(std::uint64_t addr) const noexcept {
        return addr >= base && addr - base < size;
    }
};

/// Device address map. Data occupies [0, memory_size): the volatile part
/// below the NVM window and the window itself. Monitor logs live right after
/// usable memory; encryption counters live in their own high region.
struct MemoryLayout {
    std::uint64_t memory_size = 16 * kGiB;
    AddressRange nvm_window{12 * kGiB, 4 * kGiB};
    std::uint64_t counter_region_base = std::uint64_t{1} << 44;

    [[nodiscard]] constexpr std::uint64_t log_region_base() const noexcept { return memory_size; }
    [[nodiscard]] constexpr AddressRange volatile_range() const noexcept { return {0, nvm_window.base}; }
};

enum class StorageKind { FixedLocation, GlobalCircular };

struct StorageConfig {
    StorageKind kind = StorageKind::GlobalCircular;
    /// Records in the global circular buffer; 0 selects memory_size / 20 / 32.
    std::uint64_t circular_capacity = 0;
    double backup_threshold = 0.5;
    /// Side buffer for mmap/exit notes when the fixed-location backend is active.
    std::uint64_t note_capacity = 4096;
};

struct SchemeConfig {
    Scheme scheme = Scheme::EncryptionBaseline;
    StorageConfig storage;
    MemoryLayout layout;
    /// Path prefix whose files are placed in the NVM window.
    std::string nvm_mount = "/nvm";
    std::optional<std::string> monitored_dir;

    void validate() const {
        if (scheme == Scheme::Directory && !monitored_dir) {
            throw Error(Errc::invalid_argument, "directory scheme requires monitored_dir");
        }
        if (is_persist(scheme) && layout.nvm_window.size == 0) {
            throw Error(Errc::invalid_argument, "persist schemes require a non-empty nvm_window");
        }
        if (layout.nvm_window.end() > layout.memory_size) {
            throw Error(Errc::invalid_argument, "nvm_window exceeds memory_size");
        }
        if (layout.memory_size > layout.counter_region_base) {
            throw Error(Errc::invalid_argument, "memory_size overlaps the counter region");
        }
        if (!(storage.backup_threshold > 0.0 && storage.backup_threshold <= 1.0)) {
            throw Error(Errc::invalid_argument, "backup_threshold must lie in (0, 1]");
        }
        if (monitored_dir && (monitored_dir->empty() || monitored_dir->front() != '/')) {
            throw Error(Errc::invalid_argument, "monitored_dir must be an absolute path");
        }
    }
};

}  // namespace fox
