#pragma once

// Monitor log storage: the 32-byte record codec, the FOXL audit-log file
// format, and the two storage backends (fixed-location and global circular
// buffer with a fill-fraction backup trigger).
//
// Record layout (32 bytes, little-endian):
//   [0..8)   block address (device address, metabits trimmed)
//   [8..12)  uid
//   [12..16) gid in bits 0..30, op in bit 31 (1 = write)
//   [16..24) timestamp (logical time)
//   [24..28) inode
//   [28..30) dir_id
//   [30..32) pid
//
// mmap()/exit() notes for overflowed combinations reuse this layout with op =
// write, block address 0, inode bit 31 set and inode bit 30 set for exit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fox/address.hpp"
#include "fox/bytes.hpp"
#include "fox/error.hpp"
#include "fox/kernel_shim.hpp"
#include "fox/omft.hpp"
#include "fox/scheme.hpp"

namespace fox {

inline constexpr std::size_t kRecordBytes = 32;
inline constexpr std::uint32_t kNoteInodeFlag = 0x80000000U;
inline constexpr std::uint32_t kNoteExitFlag = 0x40000000U;
inline constexpr std::uint32_t kInodeMask = 0x3FFFFFFFU;

struct MonitorRecord {
    std::uint64_t block_address = 0;
    std::uint32_t uid = 0;
    std::uint32_t gid = 0;
    OpKind op = OpKind::Read;
    std::uint64_t timestamp = 0;
    std::uint32_t inode = 0;
    std::uint16_t dir_id = 0;
    std::uint16_t pid = 0;

    friend auto operator<=>(const MonitorRecord&, const MonitorRecord&) = default;
};

using RecordBytes = std::array<std::uint8_t, kRecordBytes>;

[[nodiscard]] inline RecordBytes encode_record(const MonitorRecord& r) {
    if (r.gid >= kGidLimit) throw Error(Errc::invalid_argument, "gid does not fit in 31 bits");
    RecordBytes out{};
    detail::store_le<std::uint64_t>(out, 0, r.block_address);
    detail::store_le<std::uint32_t>(out, 8, r.uid);
    detail::store_le<std::uint32_t>(out, 12, r.gid | (r.op == OpKind::Write ? 0x80000000U : 0U));
    detail::store_le<std::uint64_t>(out, 16, r.timestamp);
    detail::store_le<std::uint32_t>(out, 24, r.inode);
    detail::store_le<std::uint16_t>(out, 28, r.dir_id);
    detail::store_le<std::uint16_t>(out, 30, r.pid);
    return out;
}

[[nodiscard]] inline MonitorRecord decode_record(std::span<const std::uint8_t> in) {
    if (in.size() != kRecordBytes) {
        throw Error(Errc::codec, "monitor record must be 32 bytes, got " + std::to_string(in.size()));
    }
    MonitorRecord r;
    r.block_address = detail::load_le<std::uint64_t>(in, 0);
    r.uid = detail::load_le<std::uint32_t>(in, 8);
    const auto packed = detail::load_le<std::uint32_t>(in, 12);
    r.gid = packed & 0x7FFFFFFFU;
    r.op = (packed & 0x80000000U) != 0 ? OpKind::Write : OpKind::Read;
    r.timestamp = detail::load_le<std::uint64_t>(in, 16);
    r.inode = detail::load_le<std::uint32_t>(in, 24);
    r.dir_id = detail::load_le<std::uint16_t>(in, 28);
    r.pid = detail::load_le<std::uint16_t>(in, 30);
    return r;
}

[[nodiscard]] constexpr bool is_note(const MonitorRecord& r) noexcept { return (r.inode & kNoteInodeFlag) != 0; }

[[nodiscard]] constexpr NoteKind note_kind(const MonitorRecord& r) noexcept {
    return (r.inode & kNoteExitFlag) != 0 ? NoteKind::Exit : NoteKind::Mmap;
}

[[nodiscard]] constexpr Inode record_inode(const MonitorRecord& r) noexcept {
    return is_note(r) ? (r.inode & kInodeMask) : r.inode;
}

[[nodiscard]] inline MonitorRecord note_record(const LifecycleNote& n) {
    MonitorRecord r;
    r.block_address = 0;
    r.uid = n.uid;
    r.gid = n.gid;
    r.op = OpKind::Write;
    r.timestamp = n.time;
    r.inode = (n.inode & kInodeMask) | kNoteInodeFlag | (n.kind == NoteKind::Exit ? kNoteExitFlag : 0U);
    r.dir_id = n.dir_id;
    r.pid = n.pid;
    return r;
}

// ---------------------------------------------------------------------------
// FOXL audit-log files: "FOXL", version byte, then 32-byte records.

inline constexpr std::array<char, 4> kFoxlMagic = {'F', 'O', 'X', 'L'};
inline constexpr std::uint8_t kFoxlVersion = 1;
inline constexpr std::size_t kFoxlHeaderBytes = 5;

inline void write_foxl_header(std::ostream& out) {
    out.write(kFoxlMagic.data(), kFoxlMagic.size());
    out.put(static_cast<char>(kFoxlVersion));
}

inline void write_foxl_records(std::ostream& out, std::span<const MonitorRecord> records) {
    for (const auto& r : records) {
        const auto bytes = encode_record(r);
        out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    }
}

inline void write_foxl(std::ostream& out, std::span<const MonitorRecord> records) {
    write_foxl_header(out);
    write_foxl_records(out, records);
    if (!out) throw Error(Errc::io, "failed writing FOXL stream");
}

[[nodiscard]] inline std::vector<MonitorRecord> read_foxl(std::istream& in) {
    std::vector<char> buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (buf.size() < kFoxlHeaderBytes || !std::equal(kFoxlMagic.begin(), kFoxlMagic.end(), buf.begin())) {
        throw Error(Errc::codec, "missing FOXL magic");
    }
    if (static_cast<std::uint8_t>(buf[4]) != kFoxlVersion) {
        throw Error(Errc::codec, "unsupported FOXL version " + std::to_string(static_cast<std::uint8_t>(buf[4])));
    }
    const std::size_t body = buf.size() - kFoxlHeaderBytes;
    if (body % kRecordBytes != 0) throw Error(Errc::codec, "truncated FOXL record");
    std::vector<MonitorRecord> out;
    out.reserve(body / kRecordBytes);
    const auto* base = reinterpret_cast<const std::uint8_t*>(buf.data()) + kFoxlHeaderBytes;
    for (std::size_t off = 0; off < body; off += kRecordBytes) {
        out.push_back(decode_record(std::span<const std::uint8_t>(base + off, kRecordBytes)));
    }
    return out;
}

[[nodiscard]] inline std::vector<MonitorRecord> read_foxl_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open '" + path.string() + "'");
    return read_foxl(in);
}

// ---------------------------------------------------------------------------
// Backup sinks.

class RecordSink {
public:
    virtual ~RecordSink() = default;
    /// Must throw Error(Errc::io) without partial effect visible to the caller on failure.
    virtual void write(std::span<const MonitorRecord> records) = 0;
};

class MemorySink final : public RecordSink {
public:
    void write(std::span<const MonitorRecord> records) override {
        records_.insert(records_.end(), records.begin(), records.end());
    }
    [[nodiscard]] const std::vector<MonitorRecord>& records() const noexcept { return records_; }

private:
    std::vector<MonitorRecord> records_;
};

/// Append-only FOXL file. Writes go to "<path>.tmp"; commit() renames it into place.
class FoxlFileSink final : public RecordSink {
public:
    explicit FoxlFileSink(std::filesystem::path path) : path_(std::move(path)), tmp_(path_) {
        tmp_ += ".tmp";
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error(Errc::io, "cannot create '" + tmp_.string() + "'");
        write_foxl_header(out_);
    }

    FoxlFileSink(const FoxlFileSink&) = delete;
    FoxlFileSink& operator=(const FoxlFileSink&) = delete;

    ~FoxlFileSink() override {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    void write(std::span<const MonitorRecord> records) override {
        write_foxl_records(out_, records);
        out_.flush();
        if (!out_) throw Error(Errc::io, "failed writing '" + tmp_.string() + "'");
    }

    void commit() {
        out_.close();
        if (!out_) throw Error(Errc::io, "failed closing '" + tmp_.string() + "'");
        std::filesystem::rename(tmp_, path_);
        committed_ = true;
    }

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Backends.

class FixedLocationLog {
public:
    FixedLocationLog(std::uint64_t data_size, std::uint64_t log_base) : data_size_(data_size), log_base_(log_base) {}

    /// One 32-byte slot per 64-byte data block, laid out after usable memory.
    [[nodiscard]] std::uint64_t log_address(std::uint64_t device_address) const {
        if (device_address >= data_size_) {
            throw Error(Errc::invalid_argument, "address outside the data region has no fixed log slot");
        }
        return log_base_ + (device_address / kBlockSize) * kRecordBytes;
    }

    /// Overwrites the slot of the record's data block.
    void store(const MonitorRecord& record) {
        const auto addr = log_address(record.block_address);
        slots_.insert_or_assign(addr, record);
    }

    [[nodiscard]] const MonitorRecord* at(std::uint64_t log_addr) const {
        auto it = slots_.find(log_addr);
        return it == slots_.end() ? nullptr : &it->second;
    }

    /// Occupied slots in address order.
    [[nodiscard]] std::vector<MonitorRecord> live() const {
        std::vector<MonitorRecord> out;
        out.reserve(slots_.size());
        for (const auto& [addr, rec] : slots_) out.push_back(rec);
        return out;
    }

    [[nodiscard]] std::uint64_t log_base() const noexcept { return log_base_; }

private:
    std::uint64_t data_size_;
    std::uint64_t log_base_;
    std::map<std::uint64_t, MonitorRecord> slots_;
};

struct BackupEvent {
    std::uint64_t at_append = 0;
    std::uint64_t records = 0;
    /// Records appended since the previous backup that were overwritten before it.
    std::uint64_t lost = 0;
};

class CircularLog {
public:
    explicit CircularLog(std::uint64_t capacity, double threshold_fraction = 0.5)
        : capacity_(capacity), threshold_fraction_(threshold_fraction) {
        if (capacity == 0) throw Error(Errc::invalid_argument, "circular buffer capacity must be positive");
        if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
            throw Error(Errc::invalid_argument, "backup threshold must lie in (0, 1]");
        }
        const double raw = std::ceil(threshold_fraction * static_cast<double>(capacity) - 1e-9);
        threshold_count_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(raw));
    }

    /// Stores at head and advances it; returns the index written.
    std::uint64_t append(const MonitorRecord& record) {
        const std::uint64_t index = head_;
        if (slots_.size() < capacity_) {
            slots_.push_back(record);
        } else {
            slots_[index] = record;
        }
        head_ = (head_ + 1) % capacity_;
        ++total_appends_;
        ++since_backup_;
        return index;
    }

    /// Live records, oldest first.
    [[nodiscard]] std::vector<MonitorRecord> live() const { return newest(slots_.size()); }

    /// Live records not yet handed to a sink, oldest first.
    [[nodiscard]] std::vector<MonitorRecord> pending() const {
        return newest(std::min<std::uint64_t>(since_backup_, slots_.size()));
    }

    /// Flushes pending records once the since-last-backup count reaches the threshold.
    std::optional<BackupEvent> maybe_trigger_backup(RecordSink& sink) {
        if (since_backup_ < threshold_count_) return std::nullopt;
        return backup(sink);
    }

    /// Unconditional flush of pending records (end of run).
    BackupEvent backup(RecordSink& sink) {
        const auto records = pending();
        sink.write(records);
        BackupEvent ev{total_appends_, records.size(), since_backup_ - records.size()};
        since_backup_ = 0;
        ++backups_;
        return ev;
    }

    [[nodiscard]] std::uint64_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::uint64_t head() const noexcept { return head_; }
    [[nodiscard]] std::uint64_t total_appends() const noexcept { return total_appends_; }
    [[nodiscard]] std::uint64_t since_backup() const noexcept { return since_backup_; }
    [[nodiscard]] std::uint64_t threshold_count() const noexcept { return threshold_count_; }
    [[nodiscard]] std::uint64_t backups() const noexcept { return backups_; }
    [[nodiscard]] double threshold_fraction() const noexcept { return threshold_fraction_; }

private:
    [[nodiscard]] std::vector<MonitorRecord> newest(std::uint64_t n) const {
        std::vector<MonitorRecord> out;
        out.reserve(n);
        const std::uint64_t size = slots_.size();
        // Oldest live record sits at head once the buffer has wrapped.
        const std::uint64_t oldest = size < capacity_ ? 0 : head_;
        for (std::uint64_t i = size - n; i < size; ++i) out.push_back(slots_[(oldest + i) % size]);
        return out;
    }

    std::uint64_t capacity_;
    double threshold_fraction_;
    std::uint64_t threshold_count_ = 1;
    std::uint64_t head_ = 0;
    std::uint64_t total_appends_ = 0;
    std::uint64_t since_backup_ = 0;
    std::uint64_t backups_ = 0;
    std::vector<MonitorRecord> slots_;
};

[[nodiscard]] inline std::uint64_t default_circular_capacity(const MemoryLayout& layout) noexcept {
    return std::max<std::uint64_t>(1, layout.memory_size / 20 / kRecordBytes);
}

/// The active storage backend as seen by the Monitor Module. Under the
/// fixed-location backend, lifecycle notes go to a separate small circular
/// buffer; under the circular backend they share the global buffer.
class LogStore {
public:
    LogStore(const StorageConfig& storage, const MemoryLayout& layout)
        : kind_(storage.kind), layout_(layout) {
        if (kind_ == StorageKind::FixedLocation) {
            fixed_.emplace(layout.memory_size, layout.log_region_base());
            circular_.emplace(std::max<std::uint64_t>(1, storage.note_capacity), storage.backup_threshold);
        } else {
            const auto cap = storage.circular_capacity != 0 ? storage.circular_capacity
                                                           : default_circular_capacity(layout);
            circular_.emplace(cap, storage.backup_threshold);
        }
    }

    [[nodiscard]] StorageKind kind() const noexcept { return kind_; }

    /// Device address the next monitor record for this data address lands on.
    [[nodiscard]] std::uint64_t next_log_address(std::uint64_t device_address) const {
        if (fixed_) return fixed_->log_address(device_address);
        return layout_.log_region_base() + circular_->head() * kRecordBytes;
    }

    void append_monitor(const MonitorRecord& record) {
        if (fixed_) {
            fixed_->store(record);
        } else {
            circular_->append(record);
        }
    }

    void append_note(const MonitorRecord& record) { circular_->append(record); }

    std::optional<BackupEvent> maybe_trigger_backup(RecordSink& sink) { return circular_->maybe_trigger_backup(sink); }

    /// Writes everything not yet backed up: pending circular records, then
    /// (fixed-location) the occupied log slots.
    void final_flush(RecordSink& sink) {
        circular_->backup(sink);
        if (fixed_) {
            const auto slots = fixed_->live();
            sink.write(slots);
        }
    }

    [[nodiscard]] std::vector<MonitorRecord> live() const {
        auto out = circular_->live();
        if (fixed_) {
            auto slots = fixed_->live();
            out.insert(out.end(), slots.begin(), slots.end());
        }
        return out;
    }

    [[nodiscard]] const CircularLog& circular() const noexcept { return *circular_; }
    [[nodiscard]] const FixedLocationLog* fixed() const noexcept { return fixed_ ? &*fixed_ : nullptr; }

private:
    StorageKind kind_;
    MemoryLayout layout_;
    std::optional<FixedLocationLog> fixed_;
    std::optional<CircularLog> circular_;
};

}  // namespace fox
