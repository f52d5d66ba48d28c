#pragma once

// Open Monitor File Table: the controller-resident, direct-mapped table of
// active (process, file) monitor combinations. Slot index == monitor index.
//
// Packed entry layout (17 bytes, little-endian):
//   [0]      bit 0 valid, bits 1..2 monitor flag, bits 3..7 zero
//   [1..5)   inode
//   [5..9)   uid
//   [9..13)  gid (31 bits, top bit zero)
//   [13..15) pid
//   [15..17) dir_id

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fox/address.hpp"
#include "fox/bytes.hpp"
#include "fox/error.hpp"

namespace fox {

inline constexpr std::size_t kOmftEntryBytes = 17;
inline constexpr std::uint32_t kGidLimit = std::uint32_t{1} << 31;

struct OmftEntry {
    bool valid = false;
    Inode inode = 0;
    std::uint32_t uid = 0;
    std::uint32_t gid = 0;
    MonitorFlag flag = MonitorFlag::NoMonitor;
    Pid pid = 0;
    std::uint16_t dir_id = 0;

    friend bool operator==(const OmftEntry&, const OmftEntry&) = default;
};

[[nodiscard]] inline std::array<std::uint8_t, kOmftEntryBytes> encode_omft_entry(const OmftEntry& e) {
    if (e.gid >= kGidLimit) throw Error(Errc::invalid_argument, "gid does not fit in 31 bits");
    std::array<std::uint8_t, kOmftEntryBytes> out{};
    out[0] = static_cast<std::uint8_t>((e.valid ? 1U : 0U) | (static_cast<unsigned>(e.flag) << 1));
    detail::store_le<std::uint32_t>(out, 1, e.inode);
    detail::store_le<std::uint32_t>(out, 5, e.uid);
    detail::store_le<std::uint32_t>(out, 9, e.gid);
    detail::store_le<std::uint16_t>(out, 13, e.pid);
    detail::store_le<std::uint16_t>(out, 15, e.dir_id);
    return out;
}

[[nodiscard]] inline OmftEntry decode_omft_entry(std::span<const std::uint8_t> in) {
    if (in.size() != kOmftEntryBytes) {
        throw Error(Errc::codec, "OMFT entry must be 17 bytes, got " + std::to_string(in.size()));
    }
    if ((in[0] & 0xF8U) != 0 || (in[12] & 0x80U) != 0) {
        throw Error(Errc::codec, "reserved OMFT bits set");
    }
    OmftEntry e;
    e.valid = (in[0] & 1U) != 0;
    e.flag = static_cast<MonitorFlag>((in[0] >> 1) & 0b11U);
    e.inode = detail::load_le<std::uint32_t>(in, 1);
    e.uid = detail::load_le<std::uint32_t>(in, 5);
    e.gid = detail::load_le<std::uint32_t>(in, 9);
    e.pid = detail::load_le<std::uint16_t>(in, 13);
    e.dir_id = detail::load_le<std::uint16_t>(in, 15);
    return e;
}

class OpenMonitorFileTable {
public:
    void install(MonitorIndex index, OmftEntry entry) {
        check_index(index);
        entry.valid = true;
        slots_[index] = entry;
    }

    void evict(MonitorIndex index) noexcept {
        if (index < kMonitorSlots) slots_[index].valid = false;
    }

    /// Out-of-range and slot-0 lookups yield an invalid entry.
    [[nodiscard]] const OmftEntry& lookup(MonitorIndex index) const noexcept {
        static const OmftEntry invalid{};
        return index < kMonitorSlots ? slots_[index] : invalid;
    }

    [[nodiscard]] std::size_t valid_count() const noexcept {
        std::size_t n = 0;
        for (const auto& e : slots_) n += e.valid ? 1 : 0;
        return n;
    }

    /// 512 x 17-byte records, slot order.
    [[nodiscard]] std::vector<std::uint8_t> dump() const {
        std::vector<std::uint8_t> out;
        out.reserve(kMonitorSlots * kOmftEntryBytes);
        for (const auto& e : slots_) {
            const auto bytes = encode_omft_entry(e);
            out.insert(out.end(), bytes.begin(), bytes.end());
        }
        return out;
    }

    [[nodiscard]] static OpenMonitorFileTable load(std::span<const std::uint8_t> bytes) {
        if (bytes.size() != kMonitorSlots * kOmftEntryBytes) {
            throw Error(Errc::codec, "OMFT dump must be 512 x 17 bytes");
        }
        OpenMonitorFileTable t;
        for (std::size_t i = 0; i < kMonitorSlots; ++i) {
            t.slots_[i] = decode_omft_entry(bytes.subspan(i * kOmftEntryBytes, kOmftEntryBytes));
        }
        if (t.slots_[0].valid) throw Error(Errc::codec, "OMFT slot 0 must be invalid");
        return t;
    }

    friend bool operator==(const OpenMonitorFileTable&, const OpenMonitorFileTable&) = default;

private:
    static void check_index(MonitorIndex index) {
        if (index == 0 || index > kMaxMonitorIndex) {
            throw Error(Errc::invalid_argument,
                        "OMFT index must be in 1..511, got " + std::to_string(index));
        }
    }

    std::array<OmftEntry, kMonitorSlots> slots_{};
};

}  // namespace fox
