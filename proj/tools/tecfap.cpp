// tecfap: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data validation failure,
// 3 backend failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tecfap.hpp"

namespace fs = std::filesystem;
using namespace tecfap;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kBackend = 3 };

struct Common {
    std::string corpus;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool with_config) {
    cmd->add_option("--corpus", c.corpus, "corpus JSON file");
    cmd->add_option("--out", c.out, "output path");
    cmd->add_option("--seed", c.seed, "random seed");
    if (with_config) cmd->add_option("--config", c.config, "run config (JSON)");
}

RunConfig resolve_config(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (!c.corpus.empty()) cfg.corpus = c.corpus;
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (c.seed) {
        cfg.probe.seed = *c.seed;
        cfg.backend.oracle.seed = *c.seed;
    }
    if (cfg.corpus.empty()) throw UsageError("no corpus given (--corpus or config field 'corpus')");
    return cfg;
}

std::string require_corpus(const Common& c) {
    if (c.corpus.empty()) throw UsageError("--corpus is required");
    return c.corpus;
}

std::ostream* open_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return &std::cout;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    file.open(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot write '" + path + "'");
    return &file;
}

int cmd_validate(const Common& c) {
    const auto corpus = parse_corpus(read_file(require_corpus(c)));
    const auto violations = validate(corpus);
    if (violations.empty()) {
        std::cout << "ok: " << corpus.entries.size() << " entries\n";
        return kOk;
    }
    for (const auto& v : violations) std::cout << v.entry_id << ": " << v.invariant << ": " << v.detail << "\n";
    std::cerr << violations.size() << " violation(s)\n";
    return kData;
}

int cmd_stats(const Common& c, bool as_json) {
    const auto s = stats(load_resource(require_corpus(c)));
    if (as_json) {
        std::cout << to_json(s).dump(2) << "\n";
        return kOk;
    }
    std::cout << "pairs:                 " << s.n_pairs << "\n"
              << "patterns:              " << s.n_patterns << " (" << s.n_forward << " forward / " << s.n_backward
              << " backward)\n"
              << "avg patterns per pair: " << format_double(s.avg_patterns_per_pair) << "\n"
              << "entities:              " << s.n_entities << "\n"
              << "entity types:          " << s.n_entity_types << "\n"
              << "entities per pair:     min " << s.min_entities_per_pair << " / max " << s.max_entities_per_pair
              << " / avg " << format_double(s.avg_entities_per_pair) << "\n"
              << "samples:               " << s.n_samples << "\n";
    return kOk;
}

int cmd_split(const Common& c, double ratio) {
    const auto corpus = load_resource(require_corpus(c));
    const auto [train, test] = vertical_split(corpus, ratio, c.seed.value_or(0));
    const fs::path dir = c.out.empty() ? fs::path("split") : fs::path(c.out);
    write_text_file(dir / "train.json", serialize(train));
    write_text_file(dir / "test.json", serialize(test));
    std::cout << "train: " << train.entries.size() << " entries, test: " << test.entries.size() << " entries\n";
    return kOk;
}

int run_probe(const Common& c, std::size_t limit) {
    auto cfg = resolve_config(c);
    if (limit > 0) cfg.probe.limit = limit;
    const auto corpus = load_resource(cfg.corpus);
    auto backend = make_backend(cfg.backend, corpus);
    const auto s = tecfap::cmd_probe(cfg, corpus, *backend);
    std::cout << "probes: " << s.total << ", already present: " << s.skipped << ", written: " << s.written << "\n";
    return kOk;
}

int run_eval(const Common& c, const std::string& results, const std::string& direction, int bin_size) {
    const bool from_config = !c.config.empty();
    const auto cfg = resolve_config(c);
    const auto corpus = load_resource(cfg.corpus);
    EvalOptions opts;
    opts.bin_size = bin_size > 0 ? bin_size : cfg.bin_size;
    opts.out_dir = cfg.out_dir;
    if (!direction.empty() && direction != "both") opts.direction = parse_direction(direction);
    else if (direction.empty()) opts.direction = cfg.probe.direction;
    if (from_config) opts.expected_prompts = cfg.probe;
    const auto path = results.empty() ? (fs::path(cfg.out_dir) / kResultsFile).string() : results;
    const auto report = tecfap::cmd_eval(path, corpus, opts);
    std::cout << metrics_csv(report);
    return kOk;
}

int cmd_gen_itdata(const Common& c, ItConfig it, const std::string& context_mode) {
    const auto corpus = load_resource(require_corpus(c));
    it.context_mode = parse_context_mode(context_mode);
    it.seed = c.seed.value_or(0);
    std::ofstream file;
    auto* out = open_out(c.out, file);
    for (const auto& s : gen_it_samples(corpus, it)) *out << to_json(s).dump() << "\n";
    out->flush();
    return kOk;
}

int cmd_reward_score(const Common& c, const std::string& in_path) {
    std::optional<Corpus> corpus;
    if (!c.corpus.empty()) corpus = load_resource(c.corpus);
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + in_path + "'");
    std::vector<RewardRequest> requests;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            requests.push_back(parse_reward_request(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(in_path + ":" + std::to_string(lineno) + ": " + ex.what());
        } catch (const ParseError& ex) {
            throw ParseError(in_path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    const auto scores = score_batch(requests, corpus ? &*corpus : nullptr);
    std::ofstream file;
    auto* out = open_out(c.out, file);
    for (const auto& s : scores) *out << to_json(s).dump() << "\n";
    out->flush();
    return kOk;
}

int cmd_reward_serve(const Common& c) {
    std::optional<Corpus> corpus;
    if (!c.corpus.empty()) corpus = load_resource(c.corpus);
    std::ios::sync_with_stdio(false);
    const auto summary = serve(std::cin, std::cout, corpus ? &*corpus : nullptr);
    if (!std::cout) return kData;
    std::cerr << summary.lines << " request(s), " << summary.errors << " error(s)\n";
    return kOk;
}

int cmd_kl(const Common& c, StudyConfig study, const std::string& baseline, const std::string& json_out) {
    const auto cfg = resolve_config(c);
    const auto corpus = load_resource(cfg.corpus);
    auto backend = make_backend(cfg.backend, corpus);
    study.seed = c.seed.value_or(cfg.probe.seed);
    auto report = paraphrase_divergence_study(corpus, *backend, study, cfg.gen);
    if (!baseline.empty()) {
        const auto a = divergence_report_from_json(nlohmann::json::parse(read_file(baseline)));
        report = compare_reports(a, report);
    }
    if (!json_out.empty()) write_text_file(json_out, to_json(report).dump(2) + "\n");
    std::ofstream file;
    auto* out = open_out(c.out, file);
    *out << divergence_csv(report);
    out->flush();
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal factuality and consistency probing toolkit"};
    app.require_subcommand(1);
    Common common;

    auto* validate_cmd = app.add_subcommand("validate", "check a corpus against its schema invariants");
    add_common(validate_cmd, common, false);

    bool stats_json = false;
    auto* stats_cmd = app.add_subcommand("stats", "corpus summary statistics");
    add_common(stats_cmd, common, false);
    stats_cmd->add_flag("--json", stats_json, "print JSON");

    double ratio = 0.3;
    auto* split_cmd = app.add_subcommand("split", "vertical train/test split by subject-relation entry");
    add_common(split_cmd, common, false);
    split_cmd->add_option("--ratio", ratio, "test fraction")->check(CLI::Range(0.0, 1.0));

    std::size_t limit = 0;
    auto* probe_cmd = app.add_subcommand("probe", "run probes against a backend, appending to results.jsonl");
    add_common(probe_cmd, common, true);
    probe_cmd->add_option("--limit", limit, "stop after N new rows");

    std::string results, direction;
    int bin_size = 0;
    auto* eval_cmd = app.add_subcommand("eval", "compute metrics from a results file");
    add_common(eval_cmd, common, true);
    eval_cmd->add_option("--results", results, "results JSONL (default <out>/results.jsonl)");
    eval_cmd->add_option("--direction", direction, "both | forward | backward");
    eval_cmd->add_option("--bin-size", bin_size, "year bin width");

    ItConfig it;
    std::string context_mode = "subject_relation_line";
    auto* it_cmd = app.add_subcommand("gen-itdata", "emit multi-task instruction data as JSONL");
    add_common(it_cmd, common, false);
    it_cmd->add_option("--k2-pairs", it.n_k2_pairs, "number of paraphrase-prediction samples");
    it_cmd->add_option("--negative-ratio", it.negative_ratio, "share of non-paraphrase pairs");
    it_cmd->add_option("--context-mode", context_mode, "subject_relation_line | none");

    auto* reward_cmd = app.add_subcommand("reward", "reward scoring");
    reward_cmd->require_subcommand(1);
    std::string reward_in;
    auto* score_cmd = reward_cmd->add_subcommand("score", "score a JSONL request file");
    add_common(score_cmd, common, false);
    score_cmd->add_option("--in", reward_in, "request JSONL")->required();
    auto* serve_cmd = reward_cmd->add_subcommand("serve", "score JSONL requests from stdin to stdout");
    serve_cmd->add_option("--corpus", common.corpus, "corpus for smooth rewards");

    StudyConfig study;
    std::string baseline, kl_json;
    auto* kl_cmd = app.add_subcommand("kl", "positive vs agnostic paraphrase KL divergence study");
    add_common(kl_cmd, common, true);
    kl_cmd->add_option("--entries", study.n_entries, "entries to sample");
    kl_cmd->add_option("--pairs", study.n_pairs_per_mode, "pairs per mode per key");
    kl_cmd->add_option("--top-k", study.top_k, "first-token distribution size");
    kl_cmd->add_option("--epsilon", study.epsilon, "smoothing mass for missing tokens");
    kl_cmd->add_option("--baseline", baseline, "earlier report JSON to compare against");
    kl_cmd->add_option("--json", kl_json, "also write the report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*validate_cmd) return cmd_validate(common);
        if (*stats_cmd) return cmd_stats(common, stats_json);
        if (*split_cmd) return cmd_split(common, ratio);
        if (*probe_cmd) return run_probe(common, limit);
        if (*eval_cmd) return run_eval(common, results, direction, bin_size);
        if (*it_cmd) return cmd_gen_itdata(common, it, context_mode);
        if (*score_cmd) return cmd_reward_score(common, reward_in);
        if (*serve_cmd) return cmd_reward_serve(common);
        if (*kl_cmd) return cmd_kl(common, study, baseline, kl_json);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const SchemaError& e) {
        std::cerr << "invalid corpus:\n";
        for (const auto& v : e.violations()) std::cerr << "  " << v.entry_id << ": " << v.invariant << ": " << v.detail << "\n";
        return kData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kBackend;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
