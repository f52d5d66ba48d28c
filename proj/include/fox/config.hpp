#pragma once

// Experiment configuration as a key-value file:
//
//   # comment
//   scheme = persist_w
//   storage = circular
//   circular_capacity = 1M
//
// Integer values accept K, M, G suffixes (powers of 1024).

#include <charconv>
#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>

#include "fox/error.hpp"
#include "fox/mem_controller.hpp"
#include "fox/metrics.hpp"
#include "fox/scheme.hpp"

namespace fox {

struct ExperimentConfig {
    SchemeConfig scheme;
    CostParams cost;
    ControllerConfig controller;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_size(std::string_view v, std::size_t line) {
    std::uint64_t mult = 1;
    if (!v.empty()) {
        switch (v.back()) {
            case 'K': case 'k': mult = 1ULL << 10; break;
            case 'M': case 'm': mult = 1ULL << 20; break;
            case 'G': case 'g': mult = 1ULL << 30; break;
            default: break;
        }
        if (mult != 1) v.remove_suffix(1);
    }
    int base = 10;
    if (v.starts_with("0x") || v.starts_with("0X")) {
        v.remove_prefix(2);
        base = 16;
    }
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value, base);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ParseError(line, 1, "invalid integer '" + std::string(v) + "'");
    }
    return value * mult;
}

inline double parse_real(std::string_view v, std::size_t line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(std::string(v), &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ParseError(line, 1, "invalid number '" + std::string(v) + "'");
    }
}

inline bool parse_bool(std::string_view v, std::size_t line) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ParseError(line, 1, "invalid boolean '" + std::string(v) + "'");
}

}  // namespace detail

inline void apply_config_key(ExperimentConfig& cfg, std::string_view key, std::string_view value, std::size_t line) {
    using detail::parse_bool;
    using detail::parse_real;
    using detail::parse_size;
    auto& s = cfg.scheme;
    if (key == "scheme") {
        s.scheme = parse_scheme(value);
    } else if (key == "storage") {
        if (value == "fixed") {
            s.storage.kind = StorageKind::FixedLocation;
        } else if (value == "circular") {
            s.storage.kind = StorageKind::GlobalCircular;
        } else {
            throw ParseError(line, 1, "storage must be 'fixed' or 'circular'");
        }
    } else if (key == "circular_capacity") {
        s.storage.circular_capacity = parse_size(value, line);
    } else if (key == "backup_threshold") {
        s.storage.backup_threshold = parse_real(value, line);
    } else if (key == "note_capacity") {
        s.storage.note_capacity = parse_size(value, line);
    } else if (key == "memory_size") {
        s.layout.memory_size = parse_size(value, line);
    } else if (key == "nvm_window_base") {
        s.layout.nvm_window.base = parse_size(value, line);
    } else if (key == "nvm_window_size") {
        s.layout.nvm_window.size = parse_size(value, line);
    } else if (key == "nvm_mount") {
        s.nvm_mount = std::string(value);
    } else if (key == "monitored_dir") {
        s.monitored_dir = std::string(value);
    } else if (key == "read_ns") {
        cfg.cost.read_ns = parse_real(value, line);
    } else if (key == "write_ns") {
        cfg.cost.write_ns = parse_real(value, line);
    } else if (key == "aes_cycles") {
        cfg.cost.aes_cycles = parse_real(value, line);
    } else if (key == "clock_ghz") {
        cfg.cost.clock_ghz = parse_real(value, line);
    } else if (key == "monitor_cache_bytes") {
        cfg.controller.monitor_cache.capacity_bytes = parse_size(value, line);
    } else if (key == "monitor_cache_ways") {
        cfg.controller.monitor_cache.ways = static_cast<std::uint32_t>(parse_size(value, line));
    } else if (key == "counter_cache_bytes") {
        cfg.controller.counter_cache.capacity_bytes = parse_size(value, line);
    } else if (key == "counter_cache_ways") {
        cfg.controller.counter_cache.ways = static_cast<std::uint32_t>(parse_size(value, line));
    } else if (key == "strict_ordering") {
        cfg.controller.strict_ordering = parse_bool(value, line);
    } else {
        throw ParseError(line, 1, "unknown key '" + std::string(key) + "'");
    }
}

[[nodiscard]] inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view view = raw;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = detail::trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) throw ParseError(line, 1, "expected 'key = value'");
        const auto key = detail::trim(view.substr(0, eq));
        const auto value = detail::trim(view.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError(line, 1, "expected 'key = value'");
        apply_config_key(cfg, key, value, line);
    }
    cfg.scheme.validate();
    cfg.cost.validate();
    return cfg;
}

[[nodiscard]] inline ExperimentConfig parse_config(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_config(in);
}

}  // namespace fox
