#pragma once

// Physical-address tagging and the request vocabulary shared by the kernel
// shim and the memory controller.
//
// A tagged physical address keeps the device byte address in bits 0..47 and a
// 9-bit monitor index ("metabits") in bits 48..56. Bits 57..63 stay zero.
// Index 0 means the address is not monitored.

#include <compare>
#include <cstdint>
#include <string>

#include "fox/error.hpp"

namespace fox {

inline constexpr unsigned kDeviceAddressBits = 48;
inline constexpr unsigned kMetabitCount = 9;
inline constexpr std::uint64_t kDeviceAddressMask = (std::uint64_t{1} << kDeviceAddressBits) - 1;
inline constexpr std::uint64_t kMetabitMask = (std::uint64_t{1} << kMetabitCount) - 1;
inline constexpr std::uint16_t kMaxMonitorIndex = 511;
inline constexpr std::size_t kMonitorSlots = 512;

/// Index into the controller's open-monitor-file table; 0 is "unmonitored".
using MonitorIndex = std::uint16_t;

struct TaggedAddress {
    std::uint64_t raw = 0;

    friend constexpr auto operator<=>(const TaggedAddress&, const TaggedAddress&) = default;
};

[[nodiscard]] constexpr MonitorIndex extract_metabits(TaggedAddress addr) noexcept {
    return static_cast<MonitorIndex>((addr.raw >> kDeviceAddressBits) & kMetabitMask);
}

[[nodiscard]] constexpr std::uint64_t trim_address(TaggedAddress addr) noexcept {
    return addr.raw & kDeviceAddressMask;
}

[[nodiscard]] inline TaggedAddress encode_metabits(std::uint64_t device_address, MonitorIndex index) {
    if (device_address > kDeviceAddressMask) {
        throw Error(Errc::invalid_argument, "device address wider than 48 bits");
    }
    if (index > kMaxMonitorIndex) {
        throw Error(Errc::invalid_argument, "monitor index " + std::to_string(index) + " exceeds 511");
    }
    return TaggedAddress{device_address | (std::uint64_t{index} << kDeviceAddressBits)};
}

enum class OpKind : std::uint8_t { Read = 0, Write = 1 };

inline const char* to_string(OpKind op) noexcept { return op == OpKind::Write ? "W" : "R"; }

/// Per-file monitoring policy; bit 0 monitors reads, bit 1 monitors writes.
enum class MonitorFlag : std::uint8_t {
    NoMonitor = 0b00,
    ReadOnly = 0b01,
    WriteOnly = 0b10,
    ReadWrite = 0b11,
};

[[nodiscard]] constexpr bool matches(MonitorFlag flag, OpKind op) noexcept {
    const auto bits = static_cast<std::uint8_t>(flag);
    return op == OpKind::Read ? (bits & 0b01) != 0 : (bits & 0b10) != 0;
}

[[nodiscard]] constexpr MonitorFlag mask_flag(MonitorFlag flag, MonitorFlag mask) noexcept {
    return static_cast<MonitorFlag>(static_cast<std::uint8_t>(flag) & static_cast<std::uint8_t>(mask));
}

[[nodiscard]] inline MonitorFlag flag_from_bits(unsigned bits) {
    if (bits > 0b11) throw Error(Errc::invalid_argument, "monitor flag wider than 2 bits");
    return static_cast<MonitorFlag>(bits);
}

/// Two-character binary form used by the trace grammar ("00".."11").
[[nodiscard]] inline std::string flag_bits(MonitorFlag flag) {
    const auto bits = static_cast<unsigned>(flag);
    return {static_cast<char>('0' + ((bits >> 1) & 1)), static_cast<char>('0' + (bits & 1))};
}

using Pid = std::uint16_t;
using Inode = std::uint32_t;
using LogicalTime = std::uint64_t;

/// A read or write as it reaches the memory controller.
struct MemoryRequest {
    TaggedAddress address;
    OpKind op = OpKind::Read;
    Pid pid = 0;
    LogicalTime logical_time = 0;
};

}  // namespace fox
