#pragma once

// Model of the kernel side: the simulated DAX filesystem namespace, dax-mmap
// registration, the minor page fault handler that stamps metabits, and the
// Primary Map Table / Monitor Process Table pair (plus their dynamic backups)
// that feed and evict the controller's OMFT.
//
// Virtual layout: each pid's mappings are placed back to back starting at
// kMmapBase, in the order of that pid's mmap calls, each rounded up to whole
// pages. The layout restarts after the pid exits.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "fox/address.hpp"
#include "fox/error.hpp"
#include "fox/omft.hpp"
#include "fox/scheme.hpp"

namespace fox {

inline constexpr std::uint64_t kMmapBase = 0x10000000;

enum class Placement : std::uint8_t { Volatile, Persistent };

struct FileMeta {
    Inode inode = 0;
    std::string path;
    MonitorFlag monitor_flag = MonitorFlag::NoMonitor;
    std::uint32_t uid = 0;
    std::uint32_t gid = 0;
    /// Containing monitored directory, 0 if none.
    std::uint16_t dir_id = 0;
    Placement placement = Placement::Volatile;
};

struct PmtKey {
    Pid pid = 0;
    Inode inode = 0;

    friend auto operator<=>(const PmtKey&, const PmtKey&) = default;
};

/// Fixed 512-slot table of active (pid, inode) combinations. Slot 0 is never
/// used; allocation takes the lowest free slot.
class PrimaryMapTable {
public:
    /// Returns the slot, or nullopt when all 511 usable slots are taken.
    std::optional<MonitorIndex> insert(PmtKey key) {
        if (index_.contains(key)) {
            throw Error(Errc::invalid_argument, "PMT already holds pid " + std::to_string(key.pid) +
                                                    " inode " + std::to_string(key.inode));
        }
        for (MonitorIndex i = 1; i <= kMaxMonitorIndex; ++i) {
            if (!slots_[i]) {
                slots_[i] = key;
                index_.emplace(key, i);
                return i;
            }
        }
        return std::nullopt;
    }

    void erase(MonitorIndex slot) {
        if (slot < kMonitorSlots && slots_[slot]) {
            index_.erase(*slots_[slot]);
            slots_[slot].reset();
        }
    }

    [[nodiscard]] std::optional<MonitorIndex> find(PmtKey key) const {
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] const std::optional<PmtKey>& at(MonitorIndex slot) const { return slots_.at(slot); }
    [[nodiscard]] std::size_t occupancy() const noexcept { return index_.size(); }
    [[nodiscard]] const std::map<PmtKey, MonitorIndex>& entries() const noexcept { return index_; }

private:
    std::array<std::optional<PmtKey>, kMonitorSlots> slots_{};
    std::map<PmtKey, MonitorIndex> index_;
};

/// pid -> PMT slots held by that pid.
class MonitorProcessTable {
public:
    void add(Pid pid, MonitorIndex slot) { rows_[pid].push_back(slot); }

    std::vector<MonitorIndex> take(Pid pid) {
        auto node = rows_.extract(pid);
        return node ? std::move(node.mapped()) : std::vector<MonitorIndex>{};
    }

    [[nodiscard]] const std::vector<MonitorIndex>* find(Pid pid) const {
        auto it = rows_.find(pid);
        return it == rows_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] const std::map<Pid, std::vector<MonitorIndex>>& rows() const noexcept { return rows_; }

private:
    std::map<Pid, std::vector<MonitorIndex>> rows_;
};

/// Overflow store for combinations that did not fit in the PMT.
struct BackupTables {
    std::map<PmtKey, LogicalTime> map;
    std::map<Pid, std::vector<PmtKey>> by_pid;

    [[nodiscard]] bool empty() const noexcept { return map.empty(); }
};

struct MmapRegion {
    Pid pid = 0;
    Inode inode = 0;
    std::uint64_t virtual_base = 0;
    std::uint64_t length = 0;
    std::uint64_t device_base = 0;
    bool shared = false;

    [[nodiscard]] bool contains(std::uint64_t vaddr) const noexcept {
        return vaddr >= virtual_base && vaddr - virtual_base < length;
    }
};

struct OmftInstall {
    MonitorIndex index = 0;
    OmftEntry entry;
};

struct OmftEvict {
    MonitorIndex index = 0;
};

enum class NoteKind : std::uint8_t { Mmap, Exit };

/// mmap()/exit() of a combination that lives in the backup tables. These are
/// written to the global circular buffer since the controller never sees
/// tagged traffic for them.
struct LifecycleNote {
    NoteKind kind = NoteKind::Mmap;
    Pid pid = 0;
    Inode inode = 0;
    std::uint32_t uid = 0;
    std::uint32_t gid = 0;
    std::uint16_t dir_id = 0;
    LogicalTime time = 0;
};

using ControlMessage = std::variant<OmftInstall, OmftEvict, LifecycleNote>;

struct ExitSummary {
    std::vector<MonitorIndex> evicted_slots;
    std::vector<PmtKey> backup_removed;

    [[nodiscard]] bool empty() const noexcept { return evicted_slots.empty() && backup_removed.empty(); }
};

/// Component-wise prefix test: "/a/b" is under "/a" but not under "/a/bc".
[[nodiscard]] inline bool path_under(std::string_view path, std::string_view dir) noexcept {
    if (dir == "/") return path.size() > 1 && path.front() == '/';
    return path.size() > dir.size() && path.starts_with(dir) && path[dir.size()] == '/';
}

[[nodiscard]] inline MonitorFlag resolve_monitor_flag(const FileMeta& file, Scheme scheme) noexcept {
    switch (scheme) {
        case Scheme::EncryptionBaseline:
            return MonitorFlag::NoMonitor;
        case Scheme::FullRW:
            return file.monitor_flag;
        case Scheme::FullW:
            return mask_flag(file.monitor_flag, MonitorFlag::WriteOnly);
        case Scheme::PersistRW:
            return file.placement == Placement::Persistent ? file.monitor_flag : MonitorFlag::NoMonitor;
        case Scheme::PersistW:
            return file.placement == Placement::Persistent
                       ? mask_flag(file.monitor_flag, MonitorFlag::WriteOnly)
                       : MonitorFlag::NoMonitor;
        case Scheme::Directory:
            return file.dir_id != 0 ? file.monitor_flag : MonitorFlag::NoMonitor;
    }
    return MonitorFlag::NoMonitor;
}

class KernelShim {
public:
    explicit KernelShim(SchemeConfig config)
        : config_(std::move(config)),
          volatile_next_(config_.layout.volatile_range().base),
          persistent_next_(config_.layout.nvm_window.base) {
        config_.validate();
        if (config_.monitored_dir) set_monitored_directory(*config_.monitored_dir);
    }

    FileMeta register_file(const std::string& path, std::uint32_t uid, std::uint32_t gid,
                           MonitorFlag flag) {
        if (path.empty() || path.front() != '/') {
            throw Error(Errc::invalid_argument, "path must be absolute: '" + path + "'");
        }
        if (by_path_.contains(path)) throw Error(Errc::invalid_argument, "duplicate path '" + path + "'");
        if (gid >= kGidLimit) throw Error(Errc::invalid_argument, "gid does not fit in 31 bits");
        if (files_.size() >= kMaxInode) throw Error(Errc::resource_exhausted, "inode space exhausted");

        FileMeta meta;
        meta.inode = static_cast<Inode>(files_.size() + 1);
        meta.path = path;
        meta.monitor_flag = flag;
        meta.uid = uid;
        meta.gid = gid;
        meta.dir_id = directory_of(path);
        meta.placement = path_under(path, config_.nvm_mount) ? Placement::Persistent : Placement::Volatile;
        by_path_.emplace(path, meta.inode);
        files_.push_back(FileState{std::move(meta), {}});
        return files_.back().meta;
    }

    /// Idempotent; existing files are re-resolved to their innermost monitored directory.
    std::uint16_t set_monitored_directory(std::string path) {
        if (path.empty() || path.front() != '/') {
            throw Error(Errc::invalid_argument, "directory must be absolute: '" + path + "'");
        }
        while (path.size() > 1 && path.back() == '/') path.pop_back();
        auto it = std::find(dirs_.begin(), dirs_.end(), path);
        if (it != dirs_.end()) return static_cast<std::uint16_t>(it - dirs_.begin() + 1);
        if (dirs_.size() >= 0xFFFF) throw Error(Errc::resource_exhausted, "too many monitored directories");
        dirs_.push_back(std::move(path));
        for (auto& f : files_) f.meta.dir_id = directory_of(f.meta.path);
        return static_cast<std::uint16_t>(dirs_.size());
    }

    [[nodiscard]] MonitorFlag resolve_monitor_flag(const FileMeta& file) const noexcept {
        return fox::resolve_monitor_flag(file, config_.scheme);
    }

    MmapRegion dax_mmap(Pid pid, const std::string& path, std::uint64_t length, bool shared,
                               LogicalTime now) {
        auto it = by_path_.find(path);
        if (it == by_path_.end()) throw Error(Errc::invalid_argument, "mmap of unregistered file '" + path + "'");
        if (length == 0) throw Error(Errc::invalid_argument, "mmap length must be positive");
        auto& file = files_[it->second - 1];
        const Inode inode = file.meta.inode;

        auto& space = spaces_[pid];
        for (const auto& r : space.regions) {
            if (r.inode == inode) {
                throw Error(Errc::invalid_argument, "pid " + std::to_string(pid) + " already maps '" + path + "'");
            }
        }

        const std::uint64_t pages = (length + kPageSize - 1) / kPageSize;
        grow_extent(file, pages);

        MmapRegion region;
        region.pid = pid;
        region.inode = inode;
        region.virtual_base = kMmapBase + space.next_offset;
        region.length = pages * kPageSize;
        region.device_base = file.pages.front();
        region.shared = shared;
        space.next_offset += region.length;
        space.regions.push_back(region);

        const MonitorFlag flag = resolve_monitor_flag(file.meta);
        if (flag != MonitorFlag::NoMonitor) {
            const PmtKey key{pid, inode};
            if (auto slot = pmt_.insert(key)) {
                mpt_.add(pid, *slot);
                OmftEntry entry;
                entry.valid = true;
                entry.inode = inode;
                entry.uid = file.meta.uid;
                entry.gid = file.meta.gid;
                entry.flag = flag;
                entry.pid = pid;
                entry.dir_id = file.meta.dir_id;
                channel_.emplace_back(OmftInstall{*slot, entry});
            } else {
                backup_.map.emplace(key, now);
                backup_.by_pid[pid].push_back(key);
                channel_.emplace_back(note(NoteKind::Mmap, pid, file.meta, now));
            }
        }
        return region;
    }

    /// Maps the page holding vaddr on first touch. Returns the tagged page address.
    TaggedAddress handle_page_fault(Pid pid, std::uint64_t vaddr) {
        auto sit = spaces_.find(pid);
        if (sit == spaces_.end()) throw unmapped(pid, vaddr);
        auto& space = sit->second;
        const std::uint64_t vpage = vaddr / kPageSize;
        if (auto pit = space.page_table.find(vpage); pit != space.page_table.end()) return pit->second;

        const MmapRegion* region = nullptr;
        for (const auto& r : space.regions) {
            if (r.contains(vaddr)) {
                region = &r;
                break;
            }
        }
        if (!region) throw unmapped(pid, vaddr);

        const auto& file = files_[region->inode - 1];
        const std::uint64_t device_page = file.pages[(vaddr - region->virtual_base) / kPageSize];
        const MonitorIndex slot = pmt_.find(PmtKey{pid, region->inode}).value_or(0);
        const TaggedAddress tagged = encode_metabits(device_page, slot);
        space.page_table.emplace(vpage, tagged);
        ++page_faults_;
        return tagged;
    }

    /// Tagged byte address for an access, faulting the page in if needed.
    TaggedAddress translate(Pid pid, std::uint64_t vaddr) {
        const TaggedAddress page = handle_page_fault(pid, vaddr);
        return TaggedAddress{page.raw + (vaddr % kPageSize)};
    }

    ExitSummary handle_exit(Pid pid, LogicalTime now) {
        ExitSummary summary;
        summary.evicted_slots = mpt_.take(pid);
        for (MonitorIndex slot : summary.evicted_slots) {
            pmt_.erase(slot);
            channel_.emplace_back(OmftEvict{slot});
        }
        if (auto node = backup_.by_pid.extract(pid)) {
            for (const PmtKey& key : node.mapped()) {
                backup_.map.erase(key);
                channel_.emplace_back(note(NoteKind::Exit, pid, files_[key.inode - 1].meta, now));
                summary.backup_removed.push_back(key);
            }
        }
        spaces_.erase(pid);
        return summary;
    }

    /// Messages for the controller, in emission order. Must be delivered
    /// before the next memory request.
    std::deque<ControlMessage> drain_messages() { return std::exchange(channel_, {}); }

    [[nodiscard]] const FileMeta& file(Inode inode) const { return files_.at(inode - 1).meta; }
    [[nodiscard]] const FileMeta* find_file(const std::string& path) const {
        auto it = by_path_.find(path);
        return it == by_path_.end() ? nullptr : &files_[it->second - 1].meta;
    }
    [[nodiscard]] std::size_t file_count() const noexcept { return files_.size(); }
    [[nodiscard]] const PrimaryMapTable& pmt() const noexcept { return pmt_; }
    [[nodiscard]] const MonitorProcessTable& mpt() const noexcept { return mpt_; }
    [[nodiscard]] const BackupTables& backup() const noexcept { return backup_; }
    [[nodiscard]] const SchemeConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::uint64_t page_faults() const noexcept { return page_faults_; }

    [[nodiscard]] std::vector<MmapRegion> regions(Pid pid) const {
        auto it = spaces_.find(pid);
        return it == spaces_.end() ? std::vector<MmapRegion>{} : it->second.regions;
    }

private:
    static constexpr std::size_t kMaxInode = (std::size_t{1} << 30) - 1;

    struct FileState {
        FileMeta meta;
        std::vector<std::uint64_t> pages;
    };

    struct AddressSpace {
        std::vector<MmapRegion> regions;
        std::uint64_t next_offset = 0;
        std::unordered_map<std::uint64_t, TaggedAddress> page_table;
    };

    std::uint16_t directory_of(std::string_view path) const noexcept {
        std::uint16_t best = 0;
        std::size_t best_len = 0;
        for (std::size_t i = 0; i < dirs_.size(); ++i) {
            if (path_under(path, dirs_[i]) && (best == 0 || dirs_[i].size() > best_len)) {
                best = static_cast<std::uint16_t>(i + 1);
                best_len = dirs_[i].size();
            }
        }
        return best;
    }

    void grow_extent(FileState& file, std::uint64_t pages) {
        if (file.pages.size() >= pages) return;
        const bool persistent = file.meta.placement == Placement::Persistent;
        const AddressRange range = persistent ? config_.layout.nvm_window : config_.layout.volatile_range();
        std::uint64_t& next = persistent ? persistent_next_ : volatile_next_;
        const std::uint64_t needed = (pages - file.pages.size()) * kPageSize;
        if (next + needed > range.end()) {
            throw Error(Errc::resource_exhausted, std::string("out of simulated ") +
                                                      (persistent ? "NVM" : "volatile") + " space mapping '" +
                                                      file.meta.path + "'");
        }
        while (file.pages.size() < pages) {
            file.pages.push_back(next);
            next += kPageSize;
        }
    }

    static LifecycleNote note(NoteKind kind, Pid pid, const FileMeta& meta, LogicalTime now) {
        return LifecycleNote{kind, pid, meta.inode, meta.uid, meta.gid, meta.dir_id, now};
    }

    static Error unmapped(Pid pid, std::uint64_t vaddr) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(vaddr));
        return Error(Errc::fault, "pid " + std::to_string(pid) + " touched unmapped address " + buf);
    }

    SchemeConfig config_;
    std::vector<FileState> files_;
    std::unordered_map<std::string, Inode> by_path_;
    std::vector<std::string> dirs_;
    std::map<Pid, AddressSpace> spaces_;
    PrimaryMapTable pmt_;
    MonitorProcessTable mpt_;
    BackupTables backup_;
    std::deque<ControlMessage> channel_;
    std::uint64_t volatile_next_;
    std::uint64_t persistent_next_;
    std::uint64_t page_faults_ = 0;
};

}  // namespace fox
