#pragma once

// Dependence graphs rebuilt from audit logs, with backtracking queries.
//
// Nodes are processes and files. Information-flow edges: a write goes
// process -> file, a read goes file -> process, and a mapping (what a
// syscall-level auditor sees at mmap time) goes file -> process. Repeated
// (from, to, op) events coalesce into one edge that keeps its first/last time,
// event count and touched block range.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fox/address.hpp"
#include "fox/error.hpp"
#include "fox/log_store.hpp"
#include "fox/workload.hpp"

namespace fox {

enum class NodeKind : std::uint8_t { Process, File };

inline constexpr std::uint64_t kNoBlock = std::numeric_limits<std::uint64_t>::max();

struct NodeId {
    NodeKind kind = NodeKind::Process;
    std::uint32_t id = 0;
    /// Set only for per-block file nodes.
    std::uint64_t block = kNoBlock;

    static NodeId process(Pid pid) { return {NodeKind::Process, pid, kNoBlock}; }
    static NodeId file(Inode inode, std::uint64_t block = kNoBlock) { return {NodeKind::File, inode, block}; }

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

[[nodiscard]] inline std::string to_string(const NodeId& n) {
    std::string s = (n.kind == NodeKind::Process ? "P" : "F") + std::to_string(n.id);
    if (n.block != kNoBlock) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "+0x%llx", static_cast<unsigned long long>(n.block));
        s += buf;
    }
    return s;
}

/// Accepts "P5", "P:5", "F9", "F:9".
[[nodiscard]] inline NodeId parse_node(std::string_view text) {
    if (text.size() < 2 || (text[0] != 'P' && text[0] != 'F')) {
        throw Error(Errc::invalid_argument, "node must look like P:<pid> or F:<inode>");
    }
    const NodeKind kind = text[0] == 'P' ? NodeKind::Process : NodeKind::File;
    text.remove_prefix(text[1] == ':' ? 2 : 1);
    std::uint32_t id = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(Errc::invalid_argument, "bad node id '" + std::string(text) + "'");
    }
    return {kind, id, kNoBlock};
}

enum class EdgeOp : std::uint8_t { Read, Write, Map };

inline const char* to_string(EdgeOp op) noexcept {
    switch (op) {
        case EdgeOp::Read: return "R";
        case EdgeOp::Write: return "W";
        case EdgeOp::Map: return "M";
    }
    return "?";
}

struct EdgeKey {
    NodeId from;
    NodeId to;
    EdgeOp op = EdgeOp::Read;
    friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct Edge {
    EdgeKey key;
    LogicalTime first_time = 0;
    LogicalTime last_time = 0;
    std::uint64_t count = 0;
    std::uint64_t min_block = kNoBlock;
    std::uint64_t max_block = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// <subject, operation, object> as recovered from one monitor record.
struct ProvenanceEvent {
    Pid subject = 0;
    OpKind op = OpKind::Read;
    Inode object = 0;
    std::uint64_t block = 0;
    LogicalTime time = 0;
};

struct GraphOptions {
    bool per_block_nodes = false;
};

class DependenceGraph {
public:
    explicit DependenceGraph(GraphOptions options = {}) : options_(options) {}

    void add_event(const ProvenanceEvent& ev) {
        const NodeId proc = NodeId::process(ev.subject);
        const std::uint64_t block = ev.block - ev.block % kBlockSize;
        const NodeId file = NodeId::file(ev.object, options_.per_block_nodes ? block : kNoBlock);
        if (ev.op == OpKind::Write) {
            add_edge({proc, file, EdgeOp::Write}, ev.time, block);
        } else {
            add_edge({file, proc, EdgeOp::Read}, ev.time, block);
        }
    }

    void add_mapping(Pid pid, Inode inode, LogicalTime time) {
        add_edge({NodeId::file(inode), NodeId::process(pid), EdgeOp::Map}, time, kNoBlock);
    }

    void add_node(const NodeId& n) { nodes_.insert(n); }

    /// Inserts a fully formed edge, e.g. when extracting a subgraph.
    void add_edge_copy(const Edge& e) {
        nodes_.insert(e.key.from);
        nodes_.insert(e.key.to);
        if (edges_.emplace(e.key, e).second) incoming_[e.key.to].push_back(e.key);
    }

    [[nodiscard]] bool contains(const NodeId& n) const { return nodes_.contains(n); }
    [[nodiscard]] const std::set<NodeId>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::map<EdgeKey, Edge>& edges() const noexcept { return edges_; }
    [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
    [[nodiscard]] const GraphOptions& options() const noexcept { return options_; }

    /// Edges ending at n, ordered by first time.
    [[nodiscard]] std::vector<Edge> incoming(const NodeId& n) const {
        std::vector<Edge> out;
        if (auto it = incoming_.find(n); it != incoming_.end()) {
            for (const auto& k : it->second) out.push_back(edges_.at(k));
        }
        std::sort(out.begin(), out.end(), by_time);
        return out;
    }

    /// One line per edge, sorted by first time then endpoints.
    [[nodiscard]] std::string to_text() const {
        std::vector<Edge> all;
        all.reserve(edges_.size());
        for (const auto& [k, e] : edges_) all.push_back(e);
        std::sort(all.begin(), all.end(), by_time);
        std::ostringstream out;
        for (const auto& e : all) {
            out << fox::to_string(e.key.from) << " -> " << fox::to_string(e.key.to) << ' ' << to_string(e.key.op)
                << " first=" << e.first_time << " last=" << e.last_time << " count=" << e.count;
            if (e.min_block != kNoBlock) {
                char buf[64];
                std::snprintf(buf, sizeof buf, " blocks=0x%llx-0x%llx", static_cast<unsigned long long>(e.min_block),
                              static_cast<unsigned long long>(e.max_block));
                out << buf;
            }
            out << '\n';
        }
        return std::move(out).str();
    }

    [[nodiscard]] std::string summary() const {
        std::size_t procs = 0, files = 0, reads = 0, writes = 0, maps = 0;
        std::uint64_t events = 0;
        for (const auto& n : nodes_) (n.kind == NodeKind::Process ? procs : files)++;
        for (const auto& [k, e] : edges_) {
            (k.op == EdgeOp::Read ? reads : k.op == EdgeOp::Write ? writes : maps)++;
            events += e.count;
        }
        std::ostringstream out;
        out << "processes," << procs << "\nfiles," << files << "\nedges," << edges_.size() << "\nread_edges," << reads
            << "\nwrite_edges," << writes << "\nmap_edges," << maps << "\nevents," << events << '\n';
        return std::move(out).str();
    }

    friend bool operator==(const DependenceGraph& a, const DependenceGraph& b) {
        return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
    }

private:
    static bool by_time(const Edge& a, const Edge& b) {
        return a.first_time != b.first_time ? a.first_time < b.first_time : a.key < b.key;
    }

    void add_edge(const EdgeKey& key, LogicalTime time, std::uint64_t block) {
        nodes_.insert(key.from);
        nodes_.insert(key.to);
        auto [it, inserted] = edges_.try_emplace(key);
        Edge& e = it->second;
        if (inserted) {
            e.key = key;
            e.first_time = time;
            e.last_time = time;
            incoming_[key.to].push_back(key);
        } else {
            e.first_time = std::min(e.first_time, time);
            e.last_time = std::max(e.last_time, time);
        }
        ++e.count;
        if (block != kNoBlock) {
            e.min_block = std::min(e.min_block, block);
            e.max_block = std::max(e.max_block, block);
        }
    }

    GraphOptions options_;
    std::set<NodeId> nodes_;
    std::map<EdgeKey, Edge> edges_;
    std::map<NodeId, std::vector<EdgeKey>> incoming_;
};

[[nodiscard]] inline ProvenanceEvent to_event(const MonitorRecord& r) {
    return ProvenanceEvent{r.pid, r.op, r.inode, r.block_address, r.timestamp};
}

/// Monitor records become information-flow edges; mmap notes of overflowed
/// combinations become mapping edges; exit notes only register the process.
[[nodiscard]] inline DependenceGraph build_graph(std::span<const MonitorRecord> records, GraphOptions options = {}) {
    DependenceGraph g(options);
    for (const auto& r : records) {
        if (!is_note(r)) {
            g.add_event(to_event(r));
        } else if (note_kind(r) == NoteKind::Mmap) {
            g.add_mapping(r.pid, record_inode(r), r.timestamp);
        } else {
            g.add_node(NodeId::process(r.pid));
        }
    }
    return g;
}

[[nodiscard]] inline DependenceGraph build_graph(const std::filesystem::path& foxl, GraphOptions options = {}) {
    const auto records = read_foxl_file(foxl);
    return build_graph(records, options);
}

/// What a syscall-level auditor reconstructs from a trace: one mapping edge
/// per mmap() and nothing for the loads and stores that follow. Inodes are
/// numbered by registration order from 1, matching the kernel shim.
[[nodiscard]] inline DependenceGraph build_syscall_graph(const Trace& trace, GraphOptions options = {}) {
    DependenceGraph g(options);
    std::unordered_map<std::string, Inode> inodes;
    LogicalTime t = 0;
    for (const auto& ev : trace) {
        ++t;
        if (const auto* r = std::get_if<RegisterFile>(&ev)) {
            inodes.emplace(r->path, static_cast<Inode>(inodes.size() + 1));
        } else if (const auto* m = std::get_if<Mmap>(&ev)) {
            auto it = inodes.find(m->path);
            if (it == inodes.end()) throw Error(Errc::invalid_argument, "mmap of unregistered file '" + m->path + "'");
            g.add_mapping(m->pid, it->second, t);
        } else if (const auto* x = std::get_if<Exit>(&ev)) {
            g.add_node(NodeId::process(x->pid));
        }
    }
    return g;
}

/// Transitive predecessors of `detection` over edges whose first occurrence is
/// at or before detection_time.
[[nodiscard]] inline DependenceGraph backtrack(const DependenceGraph& graph, const NodeId& detection,
                                               LogicalTime detection_time) {
    if (!graph.contains(detection)) throw Error(Errc::not_found, "node " + to_string(detection) + " not in graph");
    DependenceGraph sub(graph.options());
    sub.add_node(detection);
    std::set<NodeId> seen{detection};
    std::deque<NodeId> work{detection};
    while (!work.empty()) {
        const NodeId n = work.front();
        work.pop_front();
        for (const Edge& e : graph.incoming(n)) {
            if (e.first_time > detection_time) continue;
            sub.add_edge_copy(e);
            if (seen.insert(e.key.from).second) work.push_back(e.key.from);
        }
    }
    return sub;
}

/// Edges present in the fine graph but not in the coarse one.
[[nodiscard]] inline std::vector<Edge> blindspot_diff(const DependenceGraph& fine, const DependenceGraph& coarse) {
    std::vector<Edge> out;
    for (const auto& [k, e] : fine.edges()) {
        if (!coarse.edges().contains(k)) out.push_back(e);
    }
    return out;
}

}  // namespace fox
