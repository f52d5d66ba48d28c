// fox: command-line harness for the file-auditing simulator.
//
//   fox gen      --kind daxbench --rw-ratio 0.5 --events 100000 --seed 7 --out t.trace
//   fox mix      --inputs a.trace,b.trace --seed 3 --out m.trace
//   fox run      --trace t.trace --scheme full_rw --out-log a.foxl --out-csv r.csv
//   fox compare  --trace t.trace --schemes baseline,full_rw,persist_w --out r.csv
//   fox analyze  --log a.foxl --backtrack F:9@t=500
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fox/fox.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

/// Raised for flag problems found after CLI11 parsing but before any side effect.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw fox::Error(fox::Errc::io, "cannot create '" + tmp.string() + "'");
        out << content;
        out.close();
        if (!out) throw fox::Error(fox::Errc::io, "failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

fox::Trace load_trace(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw fox::Error(fox::Errc::io, "cannot open trace '" + path.string() + "'");
    return fox::parse_trace(in);
}

fox::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    try {
        return fox::parse_config(in);
    } catch (const fox::Error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("FOX_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError("FOX_SEED is not an unsigned integer");
        }
    }
    return 0;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct SchemeFlags {
    std::string config;
    std::string monitored_dir;
    std::string storage;
    std::uint64_t circular_capacity = 0;
    bool strict = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "Key-value experiment config file");
        cmd->add_option("--monitored-dir", monitored_dir, "Monitored directory for the directory scheme");
        cmd->add_option("--storage", storage, "Log backend: fixed or circular")->check(CLI::IsMember({"fixed", "circular"}));
        cmd->add_option("--circular-capacity", circular_capacity, "Circular buffer capacity in records");
        cmd->add_flag("--strict-ordering-check", strict, "Assert data-before-monitor ordering during the run");
    }

    fox::ExperimentConfig resolve() const {
        auto cfg = load_config(config);
        if (!monitored_dir.empty()) cfg.scheme.monitored_dir = monitored_dir;
        if (storage == "fixed") cfg.scheme.storage.kind = fox::StorageKind::FixedLocation;
        if (storage == "circular") cfg.scheme.storage.kind = fox::StorageKind::GlobalCircular;
        if (circular_capacity != 0) cfg.scheme.storage.circular_capacity = circular_capacity;
        if (strict) cfg.controller.strict_ordering = true;
        return cfg;
    }
};

fox::SchemeConfig with_scheme(fox::SchemeConfig base, fox::Scheme s) {
    base.scheme = s;
    try {
        base.validate();
    } catch (const fox::Error& e) {
        throw UsageError(e.what());
    }
    return base;
}

fox::RunReport run_one(const fox::Trace& trace, const fox::ExperimentConfig& cfg, fox::Scheme scheme,
                       const std::optional<fs::path>& log_path) {
    fox::RunOptions opts;
    opts.controller = cfg.controller;
    opts.controller.collect_records = false;
    std::optional<fox::FoxlFileSink> sink;
    if (log_path) {
        sink.emplace(*log_path);
        opts.sink = &*sink;
    }
    auto report = fox::run_experiment(trace, with_scheme(cfg.scheme, scheme), cfg.cost, opts);
    if (sink) sink->commit();
    if (report.ordering_checked && !report.ordering_ok) {
        throw fox::Error(fox::Errc::invalid_argument,
                         std::string("ordering check failed under ") + std::string(fox::scheme_name(scheme)));
    }
    return report;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven simulator for hardware-assisted file auditing on DAX NVM"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic trace");
    std::string gen_kind;
    fox::GeneratorSpec gen_spec;
    std::optional<std::uint64_t> gen_seed;
    std::string gen_out;
    std::string gen_flag = "11";
    bool gen_no_exit = false;
    gen->add_option("--kind", gen_kind, "daxbench | swaparray_like | hashtable_like | spec_like")->required();
    gen->add_option("--rw-ratio", gen_spec.rw_ratio, "Read fraction");
    gen->add_option("--events", gen_spec.event_count, "Number of access events");
    gen->add_option("--seed", gen_seed, "Seed (falls back to FOX_SEED, then 0)");
    gen->add_option("--file-size", gen_spec.file_size, "Mapped file size in bytes");
    gen->add_option("--locality", gen_spec.locality, "Probability of staying near the previous block");
    gen->add_option("--pid", gen_spec.pid, "Process id");
    gen->add_option("--path", gen_spec.path, "File path (default derives from kind and pid)");
    gen->add_option("--flag", gen_flag, "Monitor flag as two binary digits");
    gen->add_flag("--no-exit", gen_no_exit, "Do not end the trace with an exit event");
    gen->add_option("--out", gen_out, "Output trace file")->required();

    // mix
    auto* mixc = app.add_subcommand("mix", "Interleave traces with disjoint pids");
    std::string mix_inputs;
    std::optional<std::uint64_t> mix_seed;
    std::string mix_out;
    mixc->add_option("--inputs", mix_inputs, "Comma-separated trace files")->required();
    mixc->add_option("--seed", mix_seed, "Interleave seed (falls back to FOX_SEED, then 0)");
    mixc->add_option("--out", mix_out, "Output trace file")->required();

    // run
    auto* run = app.add_subcommand("run", "Run one scheme over a trace");
    std::string run_trace, run_scheme, run_log, run_csv;
    SchemeFlags run_flags;
    run->add_option("--trace", run_trace, "Trace file")->required();
    run->add_option("--scheme", run_scheme, "Scheme (overrides the config)");
    run->add_option("--out-log", run_log, "FOXL audit log output");
    run->add_option("--out-csv", run_csv, "CSV report output");
    run_flags.attach(run);

    // compare
    auto* cmp = app.add_subcommand("compare", "Run several schemes and normalize to the baseline");
    std::string cmp_trace, cmp_schemes = "baseline,full_rw,persist_rw,full_w,persist_w", cmp_out, cmp_log_dir;
    unsigned cmp_jobs = 1;
    SchemeFlags cmp_flags;
    cmp->add_option("--trace", cmp_trace, "Trace file")->required();
    cmp->add_option("--schemes", cmp_schemes, "Comma-separated scheme list");
    cmp->add_option("--out", cmp_out, "CSV output (stdout if omitted)");
    cmp->add_option("--log-dir", cmp_log_dir, "Write <scheme>.foxl audit logs here");
    cmp->add_option("--jobs", cmp_jobs, "Schemes simulated concurrently")->check(CLI::PositiveNumber);
    cmp_flags.attach(cmp);

    // analyze
    auto* ana = app.add_subcommand("analyze", "Rebuild the dependence graph from an audit log");
    std::string ana_log, ana_backtrack, ana_trace, ana_out;
    bool ana_graph = false, ana_blindspot = false, ana_per_block = false;
    ana->add_option("--log", ana_log, "FOXL audit log")->required();
    ana->add_option("--backtrack", ana_backtrack, "Detection point, e.g. F:9@t=500");
    bool ana_summary = false;
    ana->add_flag("--summary", ana_summary, "Print node and edge counts (default)");
    ana->add_flag("--graph", ana_graph, "Print the whole graph");
    ana->add_flag("--blindspot", ana_blindspot, "Print edges invisible to a syscall-level auditor");
    ana->add_option("--trace", ana_trace, "Trace the log came from (for --blindspot)");
    ana->add_flag("--per-block", ana_per_block, "One file node per 64-byte block");
    ana->add_option("--out", ana_out, "Output file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    auto emit = [](const std::string& out_path, const std::string& text) {
        if (out_path.empty() || out_path == "-") {
            std::cout << text;
        } else {
            write_atomic(out_path, text);
        }
    };

    try {
        if (gen->parsed()) {
            try {
                gen_spec.kind = fox::parse_generator(gen_kind);
                if (gen_flag.size() != 2 || gen_flag.find_first_not_of("01") != std::string::npos) {
                    throw UsageError("--flag must be two binary digits");
                }
                gen_spec.flag = fox::flag_from_bits(static_cast<unsigned>(std::stoul(gen_flag, nullptr, 2)));
                gen_spec.seed = resolve_seed(gen_seed);
                gen_spec.emit_exit = !gen_no_exit;
                gen_spec.validate();
            } catch (const fox::Error& e) {
                throw UsageError(e.what());
            }
            emit(gen_out, fox::format_trace(fox::generate(gen_spec)));
            return 0;
        }

        if (mixc->parsed()) {
            const auto files = split_list(mix_inputs);
            if (files.empty()) throw UsageError("--inputs is empty");
            const auto seed = resolve_seed(mix_seed);
            std::vector<fox::Trace> traces;
            for (const auto& f : files) traces.push_back(load_trace(f));
            emit(mix_out, fox::format_trace(fox::mix(traces, seed)));
            return 0;
        }

        if (run->parsed()) {
            auto cfg = run_flags.resolve();
            fox::Scheme scheme = cfg.scheme.scheme;
            if (!run_scheme.empty()) {
                try {
                    scheme = fox::parse_scheme(run_scheme);
                } catch (const fox::Error& e) {
                    throw UsageError(e.what());
                }
            }
            with_scheme(cfg.scheme, scheme);
            const auto trace = load_trace(run_trace);
            std::optional<fs::path> log;
            if (!run_log.empty()) log = run_log;
            auto report = run_one(trace, cfg, scheme, log);
            auto baseline = scheme == fox::Scheme::EncryptionBaseline
                                ? report
                                : run_one(trace, cfg, fox::Scheme::EncryptionBaseline, std::nullopt);
            const std::vector<fox::RunReport> rows{report};
            const std::string csv = fox::compare(rows, baseline);
            if (!run_csv.empty()) write_atomic(run_csv, csv);
            const auto& c = report.counters;
            std::cout << "scheme " << fox::scheme_name(scheme) << ": requests=" << report.memory_requests
                      << " monitor_writes=" << c.monitor_writes << " total_writes=" << report.total_nvm_writes
                      << " time_ns=" << report.simulated_time_ns << " pmt_peak=" << report.pmt_peak
                      << " backup_pairs=" << report.backup_pairs << '\n';
            return 0;
        }

        if (cmp->parsed()) {
            auto cfg = cmp_flags.resolve();
            std::vector<fox::Scheme> schemes;
            try {
                for (const auto& name : split_list(cmp_schemes)) schemes.push_back(fox::parse_scheme(name));
            } catch (const fox::Error& e) {
                throw UsageError(e.what());
            }
            if (schemes.empty()) throw UsageError("--schemes is empty");
            for (auto s : schemes) with_scheme(cfg.scheme, s);
            const auto trace = load_trace(cmp_trace);
            if (!cmp_log_dir.empty()) fs::create_directories(cmp_log_dir);

            auto log_for = [&](fox::Scheme s) -> std::optional<fs::path> {
                if (cmp_log_dir.empty()) return std::nullopt;
                return fs::path(cmp_log_dir) / (std::string(fox::scheme_name(s)) + ".foxl");
            };

            std::vector<fox::RunReport> reports(schemes.size());
            for (std::size_t start = 0; start < schemes.size(); start += cmp_jobs) {
                std::vector<std::future<fox::RunReport>> batch;
                for (std::size_t i = start; i < std::min<std::size_t>(schemes.size(), start + cmp_jobs); ++i) {
                    batch.push_back(std::async(cmp_jobs > 1 ? std::launch::async : std::launch::deferred,
                                               [&, i] { return run_one(trace, cfg, schemes[i], log_for(schemes[i])); }));
                }
                for (std::size_t k = 0; k < batch.size(); ++k) reports[start + k] = batch[k].get();
            }

            std::optional<fox::RunReport> baseline;
            for (const auto& r : reports) {
                if (r.scheme == fox::Scheme::EncryptionBaseline) baseline = r;
            }
            if (!baseline) baseline = run_one(trace, cfg, fox::Scheme::EncryptionBaseline, std::nullopt);
            emit(cmp_out, fox::compare(reports, *baseline));
            return 0;
        }

        if (ana->parsed()) {
            if (ana_blindspot && ana_trace.empty()) throw UsageError("--blindspot needs --trace");
            std::optional<fox::NodeId> node;
            fox::LogicalTime when = std::numeric_limits<fox::LogicalTime>::max();
            if (!ana_backtrack.empty()) {
                const auto at = ana_backtrack.find('@');
                try {
                    node = fox::parse_node(ana_backtrack.substr(0, at));
                    if (at != std::string::npos) {
                        const std::string t = ana_backtrack.substr(at + 1);
                        if (!t.starts_with("t=")) throw UsageError("backtrack time must look like @t=<time>");
                        when = std::stoull(t.substr(2));
                    }
                } catch (const fox::Error& e) {
                    throw UsageError(e.what());
                } catch (const std::logic_error&) {
                    throw UsageError("bad --backtrack value '" + ana_backtrack + "'");
                }
            }
            fox::GraphOptions opts{ana_per_block};
            const auto graph = fox::build_graph(fs::path(ana_log), opts);
            std::string text;
            if (node) {
                text = fox::backtrack(graph, *node, when).to_text();
            } else if (ana_blindspot) {
                const auto coarse = fox::build_syscall_graph(load_trace(ana_trace), opts);
                fox::DependenceGraph diff(opts);
                for (const auto& e : fox::blindspot_diff(graph, coarse)) diff.add_edge_copy(e);
                text = diff.to_text();
            } else if (ana_graph) {
                text = graph.to_text();
            } else {
                text = graph.summary();
            }
            emit(ana_out, text);
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "fox: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "fox: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}
