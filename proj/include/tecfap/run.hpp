#pragma once

// Run configuration, probe execution with resumable JSONL persistence, and
// evaluation of a results file into metric reports.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tecfap/backend.hpp"
#include "tecfap/corpus.hpp"
#include "tecfap/error.hpp"
#include "tecfap/http_backend.hpp"
#include "tecfap/metrics.hpp"
#include "tecfap/oracle_backend.hpp"
#include "tecfap/probegen.hpp"
#include "tecfap/text.hpp"

namespace tecfap {

enum class VocabMode { open, closed };

struct BackendSpec {
    std::string kind = "oracle";  // oracle | http
    std::string endpoint;
    std::string model;
    std::size_t parallelism = 1;
    OracleConfig oracle;
};

struct ProbeOptions {
    std::size_t k_shots = 0;
    std::optional<Direction> direction;  // nullopt: both
    VocabMode vocab = VocabMode::open;
    std::uint64_t seed = 0;
    std::string instruction = std::string(kDefaultInstruction);
    std::size_t limit = 0;       // stop after this many new rows; 0 = no limit
    bool record_timing = true;   // latency/timestamp columns
};

struct RunConfig {
    std::string corpus;
    BackendSpec backend;
    GenConfig gen;
    ProbeOptions probe;
    std::string out_dir = "run";
    int bin_size = 10;
};

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError(std::string("config field '") + key + "' has the wrong type");
    }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("run config must be a JSON object");
    RunConfig c;
    detail::read_opt(j, "corpus", c.corpus);
    detail::read_opt(j, "out_dir", c.out_dir);
    detail::read_opt(j, "bin_size", c.bin_size);

    if (j.contains("backend")) {
        const auto& b = j.at("backend");
        detail::read_opt(b, "kind", c.backend.kind);
        detail::read_opt(b, "endpoint", c.backend.endpoint);
        detail::read_opt(b, "model", c.backend.model);
        detail::read_opt(b, "parallelism", c.backend.parallelism);
        detail::read_opt(b, "max_new_tokens", c.gen.max_new_tokens);
        detail::read_opt(b, "max_sequence_length", c.gen.max_sequence_length);
        detail::read_opt(b, "timeout_ms", c.gen.timeout_ms);
        detail::read_opt(b, "max_retries", c.gen.max_retries);
        detail::read_opt(b, "retry_backoff_ms", c.gen.retry_backoff_ms);
        detail::read_opt(b, "top_logprobs", c.gen.top_logprobs);
        if (b.contains("oracle")) {
            const auto& o = b.at("oracle");
            detail::read_opt(o, "error_rate", c.backend.oracle.error_rate);
            detail::read_opt(o, "seed", c.backend.oracle.seed);
            std::string s;
            detail::read_opt(o, "error_model", s);
            if (!s.empty()) c.backend.oracle.error_model = parse_error_model(s);
            s.clear();
            detail::read_opt(o, "inconsistency_mode", s);
            if (!s.empty()) c.backend.oracle.inconsistency_mode = parse_inconsistency_mode(s);
        }
    }
    if (j.contains("probe")) {
        const auto& p = j.at("probe");
        detail::read_opt(p, "k_shots", c.probe.k_shots);
        detail::read_opt(p, "seed", c.probe.seed);
        detail::read_opt(p, "instruction", c.probe.instruction);
        detail::read_opt(p, "limit", c.probe.limit);
        detail::read_opt(p, "record_timing", c.probe.record_timing);
        detail::read_opt(p, "length_normalize", c.gen.length_normalize);
        std::string s;
        detail::read_opt(p, "direction", s);
        if (!s.empty() && s != "both") {
            try {
                c.probe.direction = parse_direction(s);
            } catch (const ParseError&) {
                throw UsageError("direction must be both, forward or backward");
            }
        }
        s.clear();
        detail::read_opt(p, "vocab", s);
        if (s == "closed") c.probe.vocab = VocabMode::closed;
        else if (!s.empty() && s != "open") throw UsageError("vocab must be open or closed");
    }

    if (c.backend.parallelism < 1) throw UsageError("parallelism must be at least 1");
    if (c.backend.kind != "oracle" && c.backend.kind != "http") throw UsageError("backend kind must be oracle or http");
    if (c.bin_size < 1) throw UsageError("bin_size must be at least 1");
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    try {
        return parse_run_config(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& ex) {
        throw UsageError("malformed run config: " + std::string(ex.what()));
    } catch (const ParseError& ex) {
        throw UsageError(ex.what());
    }
}

inline std::unique_ptr<Backend> make_backend(const BackendSpec& spec, const Corpus& corpus) {
    if (spec.kind == "oracle") return std::make_unique<OracleBackend>(corpus, spec.oracle);
    if (spec.endpoint.empty()) throw UsageError("http backend needs an endpoint");
    return std::make_unique<HttpBackend>(HttpConfig{spec.endpoint, spec.model, {}});
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

inline std::string prompt_hash(const PromptText& p) { return hex64(fnv1a64(p.full_text)); }

// ---------------------------------------------------------------------------
// Probe execution

inline constexpr const char* kResultsFile = "results.jsonl";

struct ProbeSummary {
    std::size_t total = 0;     // enumerated probes
    std::size_t skipped = 0;   // already present in the results file
    std::size_t written = 0;
};

namespace detail {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string row_key(const nlohmann::json& row) {
    return row.at("sr_id").get<std::string>() + "|" + std::to_string(row.at("pattern_index").get<std::size_t>()) +
           "|" + std::to_string(row.at("key_time_index").get<int>()) + "|" + row.at("direction").get<std::string>();
}

// Complete, parseable rows of an existing results file. A trailing partial
// line (interrupted write) is dropped and the file rewritten without it.
inline std::set<std::string> recover_results(const std::filesystem::path& path) {
    std::set<std::string> keys;
    if (!std::filesystem::exists(path)) return keys;
    const std::string text = read_file(path.string());
    std::string kept;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string::npos) break;
        const std::string line = text.substr(start, nl - start);
        start = nl + 1;
        try {
            const auto row = nlohmann::json::parse(line);
            if (!keys.insert(row_key(row)).second) continue;
            kept += line + "\n";
        } catch (const nlohmann::json::exception&) {
            break;
        }
    }
    if (kept.size() != text.size()) write_text_file(path, kept);
    return keys;
}

}  // namespace detail

inline nlohmann::json probe_record(const ProbeInstance& probe, const PromptText& prompt, const std::string& raw,
                                   const Words& normalized, const std::optional<std::string>& choice,
                                   std::optional<double> latency_ms, const std::string& timestamp) {
    return {{"sr_id", probe.sr_id},
            {"pattern_index", probe.pattern_index},
            {"key_time_index", probe.key_time_index},
            {"expected_time_index", probe.expected_time_index},
            {"direction", to_string(probe.direction)},
            {"prompt_hash", prompt_hash(prompt)},
            {"raw_text", raw},
            {"normalized", normalized},
            {"closed_vocab_choice", choice ? nlohmann::json(*choice) : nlohmann::json(nullptr)},
            {"latency_ms", latency_ms ? nlohmann::json(*latency_ms) : nlohmann::json(nullptr)},
            {"timestamp", timestamp.empty() ? nlohmann::json(nullptr) : nlohmann::json(timestamp)}};
}

/// Runs every pending probe against the backend and appends one JSONL row per
/// probe to <out_dir>/results.jsonl, in enumeration order. Probes already in
/// the file are skipped, so an interrupted run can be resumed. Up to
/// `parallelism` requests are in flight; a single writer keeps row order.
inline ProbeSummary cmd_probe(const RunConfig& cfg, const Corpus& corpus, Backend& backend) {
    const auto path = std::filesystem::path(cfg.out_dir) / kResultsFile;
    std::filesystem::create_directories(cfg.out_dir);
    const auto done = detail::recover_results(path);

    ProbeSummary summary;
    std::vector<ProbeInstance> todo;
    for (auto& p : enumerate_probes(corpus, cfg.probe.direction)) {
        ++summary.total;
        if (done.count(p.key())) ++summary.skipped;
        else if (cfg.probe.limit == 0 || todo.size() < cfg.probe.limit) todo.push_back(std::move(p));
    }

    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw DataError("cannot open '" + path.string() + "' for appending");

    struct Slot {
        std::optional<std::string> line;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(todo.size());
    std::mutex mu;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    auto run_one = [&](const ProbeInstance& probe) {
        const auto prompt = render_prompt(probe, corpus, cfg.probe.k_shots, cfg.probe.seed, cfg.probe.instruction);
        const auto t0 = std::chrono::steady_clock::now();
        std::string raw;
        Words normalized;
        std::optional<std::string> choice;
        if (cfg.probe.vocab == VocabMode::closed) {
            const auto ranked = score_candidates(backend, prompt, candidate_set(corpus, probe.sr_id), cfg.gen);
            choice = ranked.front().candidate;
            raw = *choice;
            normalized = normalize_output(raw);
        } else {
            auto r = backend.complete(prompt, cfg.gen);
            raw = std::move(r.raw_text);
            normalized = std::move(r.normalized);
        }
        std::optional<double> latency;
        std::string stamp;
        if (cfg.probe.record_timing) {
            latency = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            stamp = detail::utc_timestamp();
        }
        return probe_record(probe, prompt, raw, normalized, choice, latency, stamp).dump();
    };

    auto worker = [&] {
        for (std::size_t i = next++; i < todo.size() && !abort; i = next++) {
            Slot s;
            try {
                s.line = run_one(todo[i]);
            } catch (...) {
                s.error = std::current_exception();
            }
            {
                std::lock_guard lock(mu);
                slots[i] = std::move(s);
            }
            ready.notify_all();
        }
    };

    std::exception_ptr failure;
    {
        std::vector<std::jthread> pool;
        const auto n_workers = std::min<std::size_t>(cfg.backend.parallelism, std::max<std::size_t>(1, todo.size()));
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);

        for (std::size_t i = 0; i < todo.size(); ++i) {
            Slot s;
            {
                std::unique_lock lock(mu);
                ready.wait(lock, [&] { return slots[i].line || slots[i].error; });
                s = std::move(slots[i]);
            }
            if (s.error) {
                failure = s.error;
                abort = true;
                break;
            }
            out << *s.line << '\n';
            out.flush();
            ++summary.written;
        }
    }
    if (failure) std::rethrow_exception(failure);
    return summary;
}

// ---------------------------------------------------------------------------
// Evaluation

struct LoadedResults {
    std::vector<ProbeResult> results;
    std::vector<std::string> prompt_hashes;  // parallel to results
};

inline LoadedResults load_results(const std::string& path, const Corpus& corpus) {
    LoadedResults out;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read results file '" + path + "'");
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto row = nlohmann::json::parse(line);
            const auto& e = corpus.entry(row.at("sr_id").get<std::string>());
            const auto pi = row.at("pattern_index").get<std::size_t>();
            const int t = row.at("key_time_index").get<int>();
            if (pi >= e.patterns.size()) throw DataError("pattern index out of range");
            if (parse_direction(row.at("direction").get<std::string>()) != e.patterns[pi].direction ||
                !valid_key_position(e, e.patterns[pi].direction, t)) {
                throw DataError("probe identity does not match the corpus");
            }
            if (!seen.insert(detail::row_key(row)).second) throw DataError("duplicate probe row");

            ProbeResult r;
            r.instance = make_probe(e, pi, t);
            r.response.raw_text = row.at("raw_text").get<std::string>();
            r.response.normalized = row.at("normalized").get<Words>();
            if (row.contains("closed_vocab_choice") && !row.at("closed_vocab_choice").is_null()) {
                r.closed_vocab_choice = row.at("closed_vocab_choice").get<std::string>();
                if (!candidate_set(e).contains(*r.closed_vocab_choice)) {
                    throw DataError("closed-vocabulary choice is not a candidate");
                }
            }
            out.results.push_back(std::move(r));
            out.prompt_hashes.push_back(row.value("prompt_hash", std::string{}));
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed row: " + ex.what());
        } catch (const DataError& ex) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

struct EvalOptions {
    int bin_size = 10;
    std::optional<Direction> direction;  // directions that must be complete
    std::string out_dir;                 // empty: no files written
    // When set, prompt hashes are recomputed with these options to detect
    // drift between the probe run and this evaluation.
    std::optional<ProbeOptions> expected_prompts;
};

inline MetricReport cmd_eval(const std::string& results_path, const Corpus& corpus, const EvalOptions& opts) {
    auto loaded = load_results(results_path, corpus);

    std::set<std::string> have;
    for (const auto& r : loaded.results) have.insert(r.instance.key());
    std::size_t missing = 0;
    const auto expected = enumerate_probes(corpus, opts.direction);
    for (const auto& p : expected) missing += have.count(p.key()) ? 0 : 1;
    if (missing > 0) {
        throw DataError("results are incomplete: " + std::to_string(missing) + " of " +
                        std::to_string(expected.size()) + " probes missing");
    }

    if (opts.expected_prompts) {
        const auto& po = *opts.expected_prompts;
        for (std::size_t i = 0; i < loaded.results.size(); ++i) {
            const auto& inst = loaded.results[i].instance;
            const auto h = prompt_hash(render_prompt(inst, corpus, po.k_shots, po.seed, po.instruction));
            if (h != loaded.prompt_hashes[i]) throw DataError("prompt drift detected at probe " + inst.key());
        }
    }

    std::vector<ProbeResult> selected;
    for (auto& r : loaded.results) {
        if (!opts.direction || r.instance.direction == *opts.direction) selected.push_back(std::move(r));
    }
    auto report = evaluate(selected, opts.bin_size);

    if (!opts.out_dir.empty()) {
        const std::filesystem::path dir(opts.out_dir);
        write_text_file(dir / "metrics.json", to_json(report).dump(2) + "\n");
        write_text_file(dir / "metrics.csv", metrics_csv(report));
        write_text_file(dir / "by_year.csv", year_bins_csv(report));
        write_text_file(dir / "by_entity_type.csv", entity_types_csv(report));
    }
    return report;
}

}  // namespace tecfap
