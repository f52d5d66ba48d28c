#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>

namespace fox::detail {

template <std::unsigned_integral T>
constexpr void store_le(std::span<std::uint8_t> out, std::size_t offset, T value) noexcept {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out[offset + i] = static_cast<std::uint8_t>(value >> (8 * i));
    }
}

template <std::unsigned_integral T>
[[nodiscard]] constexpr T load_le(std::span<const std::uint8_t> in, std::size_t offset) noexcept {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(static_cast<T>(in[offset + i]) << (8 * i));
    }
    return value;
}

/// FNV-1a, used for trace fingerprints.
[[nodiscard]] constexpr std::uint64_t fnv1a(std::span<const char> data,
                                            std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
    std::uint64_t h = seed;
    for (char c : data) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace fox::detail
