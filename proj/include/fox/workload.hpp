#pragma once

// Trace format, parser and deterministic synthetic generators.
//
// Grammar, one event per line ('#' starts a comment):
//   R <abs-path> <uid> <gid> <flag2bit>    register file
//   D <abs-path>                           set monitored directory
//   M <pid> <abs-path> <len> <S|P>         dax-mmap, shared or private
//   A <pid> <R|W> <hex-vaddr> <size>       access within one 64-byte block
//   X <pid>                                process exit
//
// Each event's logical time is its 1-based position in the event sequence.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "fox/address.hpp"
#include "fox/bytes.hpp"
#include "fox/error.hpp"
#include "fox/kernel_shim.hpp"
#include "fox/scheme.hpp"

namespace fox {

struct RegisterFile {
    std::string path;
    std::uint32_t uid = 0;
    std::uint32_t gid = 0;
    MonitorFlag flag = MonitorFlag::NoMonitor;
    friend bool operator==(const RegisterFile&, const RegisterFile&) = default;
};

struct SetDir {
    std::string path;
    friend bool operator==(const SetDir&, const SetDir&) = default;
};

struct Mmap {
    Pid pid = 0;
    std::string path;
    std::uint64_t length = 0;
    bool shared = true;
    friend bool operator==(const Mmap&, const Mmap&) = default;
};

struct Access {
    Pid pid = 0;
    OpKind op = OpKind::Read;
    std::uint64_t vaddr = 0;
    std::uint32_t size = kBlockSize;
    friend bool operator==(const Access&, const Access&) = default;
};

struct Exit {
    Pid pid = 0;
    friend bool operator==(const Exit&, const Exit&) = default;
};

using TraceEvent = std::variant<RegisterFile, SetDir, Mmap, Access, Exit>;
using Trace = std::vector<TraceEvent>;

/// pid an event belongs to; register and directory events belong to none.
[[nodiscard]] inline std::optional<Pid> event_pid(const TraceEvent& ev) {
    if (const auto* m = std::get_if<Mmap>(&ev)) return m->pid;
    if (const auto* a = std::get_if<Access>(&ev)) return a->pid;
    if (const auto* x = std::get_if<Exit>(&ev)) return x->pid;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Text form

inline void format_event(std::ostream& out, const TraceEvent& ev) {
    std::visit(
        [&out](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, RegisterFile>) {
                out << "R " << e.path << ' ' << e.uid << ' ' << e.gid << ' ' << flag_bits(e.flag);
            } else if constexpr (std::is_same_v<T, SetDir>) {
                out << "D " << e.path;
            } else if constexpr (std::is_same_v<T, Mmap>) {
                out << "M " << e.pid << ' ' << e.path << ' ' << e.length << ' ' << (e.shared ? 'S' : 'P');
            } else if constexpr (std::is_same_v<T, Access>) {
                char buf[24];
                std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(e.vaddr));
                out << "A " << e.pid << ' ' << to_string(e.op) << ' ' << buf << ' ' << e.size;
            } else {
                out << "X " << e.pid;
            }
        },
        ev);
    out << '\n';
}

inline void format_trace(std::ostream& out, const Trace& trace) {
    for (const auto& ev : trace) format_event(out, ev);
}

[[nodiscard]] inline std::string format_trace(const Trace& trace) {
    std::ostringstream out;
    format_trace(out, trace);
    return std::move(out).str();
}

[[nodiscard]] inline std::uint64_t trace_digest(const Trace& trace) {
    const std::string text = format_trace(trace);
    return detail::fnv1a(std::span<const char>(text.data(), text.size()));
}

namespace detail {

struct Token {
    std::string_view text;
    std::size_t column = 0;
};

class LineParser {
public:
    LineParser(std::size_t line, std::string_view text) : line_(line) {
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) ++i;
            if (i >= text.size()) break;
            const std::size_t start = i;
            while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\r') ++i;
            tokens_.push_back(Token{text.substr(start, i - start), start + 1});
        }
        end_column_ = text.size() + 1;
    }

    [[nodiscard]] bool empty() const noexcept { return tokens_.empty(); }

    const Token& next(const char* what) {
        if (pos_ >= tokens_.size()) fail(end_column_, std::string("missing ") + what);
        return tokens_[pos_++];
    }

    void finish() {
        if (pos_ < tokens_.size()) fail(tokens_[pos_].column, "unexpected trailing field");
    }

    template <typename T>
    T number(const char* what, int base = 10) {
        const Token& tok = next(what);
        std::string_view s = tok.text;
        if (base == 16 && (s.starts_with("0x") || s.starts_with("0X"))) s.remove_prefix(2);
        T value{};
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, base);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
            fail(tok.column, std::string("invalid ") + what + " '" + std::string(tok.text) + "'");
        }
        return value;
    }

    std::string path(const char* what) {
        const Token& tok = next(what);
        if (tok.text.front() != '/') fail(tok.column, std::string(what) + " must be absolute");
        return std::string(tok.text);
    }

    [[nodiscard]] std::size_t last_column() const noexcept { return pos_ == 0 ? 1 : tokens_[pos_ - 1].column; }

    [[noreturn]] void fail(std::size_t column, const std::string& msg) const { throw ParseError(line_, column, msg); }

private:
    std::size_t line_;
    std::size_t end_column_ = 1;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

[[nodiscard]] inline TraceEvent parse_event(std::size_t line_no, std::string_view line) {
    detail::LineParser p(line_no, line);
    const auto& kind = p.next("event kind");
    TraceEvent ev;
    if (kind.text == "R") {
        RegisterFile r;
        r.path = p.path("path");
        r.uid = p.number<std::uint32_t>("uid");
        r.gid = p.number<std::uint32_t>("gid");
        if (r.gid >= kGidLimit) p.fail(p.last_column(), "gid does not fit in 31 bits");
        const auto& flag = p.next("flag");
        if (flag.text.size() != 2 || (flag.text[0] != '0' && flag.text[0] != '1') ||
            (flag.text[1] != '0' && flag.text[1] != '1')) {
            p.fail(flag.column, "flag must be two binary digits");
        }
        r.flag = flag_from_bits(static_cast<unsigned>((flag.text[0] - '0') * 2 + (flag.text[1] - '0')));
        ev = std::move(r);
    } else if (kind.text == "D") {
        ev = SetDir{p.path("directory")};
    } else if (kind.text == "M") {
        Mmap m;
        m.pid = p.number<Pid>("pid");
        m.path = p.path("path");
        m.length = p.number<std::uint64_t>("length");
        if (m.length == 0) p.fail(p.last_column(), "mmap length must be positive");
        const auto& mode = p.next("sharing mode");
        if (mode.text != "S" && mode.text != "P") p.fail(mode.column, "sharing mode must be S or P");
        m.shared = mode.text == "S";
        ev = std::move(m);
    } else if (kind.text == "A") {
        Access a;
        a.pid = p.number<Pid>("pid");
        const auto& op = p.next("op");
        if (op.text == "R") {
            a.op = OpKind::Read;
        } else if (op.text == "W") {
            a.op = OpKind::Write;
        } else {
            p.fail(op.column, "op must be R or W, got '" + std::string(op.text) + "'");
        }
        a.vaddr = p.number<std::uint64_t>("vaddr", 16);
        a.size = p.number<std::uint32_t>("size");
        if (a.size == 0 || (a.vaddr % kBlockSize) + a.size > kBlockSize) {
            p.fail(p.last_column(), "access must cover 1..64 bytes inside one 64-byte block");
        }
        ev = a;
    } else if (kind.text == "X") {
        ev = Exit{p.number<Pid>("pid")};
    } else {
        p.fail(kind.column, "unknown event kind '" + std::string(kind.text) + "'");
    }
    p.finish();
    return ev;
}

[[nodiscard]] inline Trace parse_trace(std::istream& in) {
    Trace out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        if (view.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        out.push_back(parse_event(line_no, view));
    }
    return out;
}

[[nodiscard]] inline Trace parse_trace(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_trace(in);
}

// ---------------------------------------------------------------------------
// Generators

enum class GeneratorKind { Daxbench, SwaparrayLike, HashtableLike, SpecLike };

inline std::string_view generator_name(GeneratorKind k) noexcept {
    switch (k) {
        case GeneratorKind::Daxbench: return "daxbench";
        case GeneratorKind::SwaparrayLike: return "swaparray_like";
        case GeneratorKind::HashtableLike: return "hashtable_like";
        case GeneratorKind::SpecLike: return "spec_like";
    }
    return "unknown";
}

inline GeneratorKind parse_generator(std::string_view name) {
    for (auto k : {GeneratorKind::Daxbench, GeneratorKind::SwaparrayLike, GeneratorKind::HashtableLike,
                   GeneratorKind::SpecLike}) {
        if (generator_name(k) == name) return k;
    }
    throw Error(Errc::invalid_argument, "unknown generator kind '" + std::string(name) + "'");
}

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::Daxbench;
    std::uint64_t file_size = 64ULL << 20;
    /// Fraction of reads (daxbench, spec_like); probability an operation is a
    /// lookup rather than an insert/remove (hashtable_like). Ignored by
    /// swaparray_like, whose swap pattern fixes the mix.
    double rw_ratio = 0.5;
    /// Probability that the next block stays near the previous one.
    double locality = 0.0;
    std::uint64_t event_count = 10000;
    std::uint64_t seed = 0;
    Pid pid = 1;
    /// Empty selects /nvm/<kind>_<pid>.dat, or /plain/... for spec_like.
    std::string path;
    MonitorFlag flag = MonitorFlag::ReadWrite;
    std::uint32_t uid = 1000;
    std::uint32_t gid = 100;
    bool emit_exit = true;

    [[nodiscard]] std::string resolved_path() const {
        if (!path.empty()) return path;
        const char* mount = kind == GeneratorKind::SpecLike ? "/plain/" : "/nvm/";
        return std::string(mount) + std::string(generator_name(kind)) + "_" + std::to_string(pid) + ".dat";
    }

    void validate() const {
        if (file_size < kPageSize) throw Error(Errc::invalid_argument, "file_size must be at least one page");
        if (!(rw_ratio >= 0.0 && rw_ratio <= 1.0)) throw Error(Errc::invalid_argument, "rw_ratio must lie in [0, 1]");
        if (!(locality >= 0.0 && locality <= 1.0)) throw Error(Errc::invalid_argument, "locality must lie in [0, 1]");
        const auto p = resolved_path();
        if (p.front() != '/') throw Error(Errc::invalid_argument, "generator path must be absolute");
    }
};

namespace detail {

/// Platform-independent sampling on top of mt19937_64 (the std distributions
/// are implementation-defined).
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = rng_();
            if (x >= threshold) return x % n;
        }
    }

    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }

private:
    std::mt19937_64 rng_;
};

class BlockWalker {
public:
    BlockWalker(Sampler& s, std::uint64_t blocks, double locality) : s_(s), blocks_(blocks), locality_(locality) {
        current_ = s_.below(blocks_);
    }

    std::uint64_t next() {
        if (s_.chance(locality_)) {
            const std::int64_t delta = static_cast<std::int64_t>(s_.below(17)) - 8;
            const auto b = static_cast<std::int64_t>(blocks_);
            current_ = static_cast<std::uint64_t>(((static_cast<std::int64_t>(current_) + delta) % b + b) % b);
        } else {
            current_ = s_.below(blocks_);
        }
        return current_;
    }

private:
    Sampler& s_;
    std::uint64_t blocks_;
    double locality_;
    std::uint64_t current_;
};

}  // namespace detail

[[nodiscard]] inline Trace generate(const GeneratorSpec& spec) {
    spec.validate();
    const std::string path = spec.resolved_path();
    const std::uint64_t blocks = spec.file_size / kBlockSize;
    detail::Sampler s(spec.seed ^ (static_cast<std::uint64_t>(spec.kind) << 56));
    detail::BlockWalker walk(s, blocks, spec.locality);

    Trace t;
    t.reserve(spec.event_count + 3);
    t.emplace_back(RegisterFile{path, spec.uid, spec.gid, spec.flag});
    t.emplace_back(Mmap{spec.pid, path, spec.file_size, true});

    std::uint64_t emitted = 0;
    auto access = [&](OpKind op, std::uint64_t block) {
        if (emitted >= spec.event_count) return;
        t.emplace_back(Access{spec.pid, op, kMmapBase + block * kBlockSize, static_cast<std::uint32_t>(kBlockSize)});
        ++emitted;
    };
    auto read_or_write = [&] { return s.chance(spec.rw_ratio) ? OpKind::Read : OpKind::Write; };

    switch (spec.kind) {
        case GeneratorKind::Daxbench:
            while (emitted < spec.event_count) access(read_or_write(), walk.next());
            break;
        case GeneratorKind::SwaparrayLike: {
            // Block 0 holds the transaction header; elements follow.
            const std::uint64_t elements = std::max<std::uint64_t>(blocks - 1, 1);
            while (emitted < spec.event_count) {
                const std::uint64_t i = 1 + walk.next() % elements;
                const std::uint64_t j = 1 + s.below(elements);
                access(OpKind::Read, i);
                access(OpKind::Read, j);
                access(OpKind::Write, i);
                access(OpKind::Write, j);
                access(OpKind::Write, 0);
            }
            break;
        }
        case GeneratorKind::HashtableLike: {
            const std::uint64_t buckets = std::max<std::uint64_t>(blocks / 8, 1);
            const std::uint64_t nodes = std::max<std::uint64_t>(blocks - buckets, 1);
            while (emitted < spec.event_count) {
                const std::uint64_t bucket = s.below(buckets);
                access(OpKind::Read, bucket);
                const std::uint64_t chain = 1 + s.below(3);
                std::uint64_t node = 0;
                for (std::uint64_t k = 0; k < chain; ++k) {
                    node = buckets + walk.next() % nodes;
                    access(OpKind::Read, node);
                }
                if (!s.chance(spec.rw_ratio)) {
                    access(OpKind::Write, node);
                    access(OpKind::Write, bucket);
                }
            }
            break;
        }
        case GeneratorKind::SpecLike: {
            std::uint64_t cursor = s.below(blocks);
            while (emitted < spec.event_count) {
                if (s.chance(spec.locality)) {
                    cursor = (cursor + 1) % blocks;
                } else {
                    cursor = s.below(blocks);
                }
                access(read_or_write(), cursor);
            }
            break;
        }
    }
    if (spec.emit_exit) t.emplace_back(Exit{spec.pid});
    return t;
}

/// Interleaves traces in round-robin order with seeded burst lengths,
/// preserving each input's internal order. pid sets must be disjoint.
[[nodiscard]] inline Trace mix(const std::vector<Trace>& traces, std::uint64_t seed) {
    std::map<Pid, std::size_t> owner;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (const auto& ev : traces[i]) {
            if (auto pid = event_pid(ev)) {
                auto [it, inserted] = owner.emplace(*pid, i);
                if (!inserted && it->second != i) {
                    throw Error(Errc::invalid_argument, "pid " + std::to_string(*pid) + " appears in two traces");
                }
            }
        }
    }

    detail::Sampler s(seed);
    std::vector<std::size_t> cursor(traces.size(), 0);
    std::size_t total = 0;
    for (const auto& t : traces) total += t.size();
    Trace out;
    out.reserve(total);
    while (out.size() < total) {
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const std::size_t burst = 1 + s.below(4);
            for (std::size_t k = 0; k < burst && cursor[i] < traces[i].size(); ++k) {
                out.push_back(traces[i][cursor[i]++]);
            }
        }
    }
    return out;
}

}  // namespace fox
