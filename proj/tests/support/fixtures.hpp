#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "tecfap.hpp"

#ifndef TECFAP_SOURCE_DIR
#error "TECFAP_SOURCE_DIR must point at the repository root"
#endif

namespace fixtures {

using namespace tecfap;

inline std::string source_path(const std::string& rel) { return std::string(TECFAP_SOURCE_DIR) + "/" + rel; }

inline Corpus mini() { return load_resource(source_path("data/temp_cofac_mini.json")); }

// Hand-counted expectations for data/temp_cofac_mini.json (timelines 5/4/3,
// 2 forward + 2 backward patterns each): 4*(5-1) + 4*(4-1) + 4*(3-1) = 36.
inline CorpusStats mini_stats() {
    CorpusStats s;
    s.n_pairs = 3;
    s.n_patterns = 12;
    s.n_forward = 6;
    s.n_backward = 6;
    s.avg_patterns_per_pair = 4.0;
    s.n_entities = 12;
    s.n_entity_types = 3;
    s.min_entities_per_pair = 3;
    s.max_entities_per_pair = 5;
    s.avg_entities_per_pair = 4.0;
    s.n_samples = 36;
    return s;
}

struct SyntheticSpec {
    std::vector<std::size_t> timeline_lengths;  // one entry per subject-relation pair
    std::size_t n_forward = 8;
    std::size_t n_backward = 8;
    std::uint64_t seed = 1;
};

// Entity names are "E<i>t<t> <word> <word>", three-word golds with a unique
// first word. Templates are distinct per (entry, direction, ordinal).
inline Corpus synthetic(const SyntheticSpec& spec) {
    static const char* kWords[] = {"alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta"};
    Rng rng(spec.seed);
    Corpus c;
    for (std::size_t i = 0; i < spec.timeline_lengths.size(); ++i) {
        SubjectRelationEntry e;
        char id[32];
        std::snprintf(id, sizeof id, "sr%03zu", i);
        e.id = id;
        e.subject = "Subject " + std::to_string(i);
        e.relation = "succeeded by";
        e.domain_tag = "synthetic";
        int year = 1500 + static_cast<int>(rng.below(400));
        const auto type = std::string(kEntityTypes[i % kEntityTypes.size()]);
        for (std::size_t t = 0; t < spec.timeline_lengths[i]; ++t) {
            year += static_cast<int>(rng.below(9));
            e.timeline.push_back({"E" + std::to_string(i) + "t" + std::to_string(t) + " " + kWords[rng.below(8)] + " " +
                                      kWords[rng.below(8)],
                                  std::min(year, kMaxYear), type});
        }
        for (std::size_t p = 0; p < spec.n_forward; ++p) {
            e.patterns.push_back({"In series " + std::to_string(i) + " variant " + std::to_string(p) +
                                      ", the one right after [X] is",
                                  Direction::forward, p == 0});
        }
        for (std::size_t p = 0; p < spec.n_backward; ++p) {
            e.patterns.push_back({"In series " + std::to_string(i) + " variant " + std::to_string(p) +
                                      ", the one right before [X] is",
                                  Direction::backward, p == 0});
        }
        c.entries.push_back(std::move(e));
    }
    return c;
}

// 66 pairs with 8 + 8 patterns, timeline lengths {2, 16, 42 x 11, 22 x 10}:
// 700 entities over 11 types, the shape reported for the released corpus.
inline Corpus table1_shaped() {
    SyntheticSpec spec;
    spec.timeline_lengths = {2, 16};
    spec.timeline_lengths.insert(spec.timeline_lengths.end(), 42, 11);
    spec.timeline_lengths.insert(spec.timeline_lengths.end(), 22, 10);
    return synthetic(spec);
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("tecfap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& rel = {}) const { return rel.empty() ? path_.string() : (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

// Test double answering through caller-supplied functions.
class ScriptedBackend : public Backend {
public:
    using Responder = std::function<std::string(const PromptText&)>;
    using Scorer = std::function<double(const PromptText&, std::string_view)>;
    using Distribution = std::function<std::vector<TokenLogprob>(const PromptText&)>;

    explicit ScriptedBackend(Responder r) : responder_(std::move(r)) {}

    Scorer scorer;
    Distribution distribution;
    std::atomic<int> calls{0};

    bool supports_scoring() const override { return static_cast<bool>(scorer); }
    bool supports_logprobs() const override { return static_cast<bool>(distribution); }

    double continuation_logprob(const PromptText& p, std::string_view c, const GenConfig&) override {
        ++calls;
        return scorer(p, c);
    }
    std::vector<TokenLogprob> next_token_logprobs(const PromptText& p, std::size_t, const GenConfig&) override {
        ++calls;
        return distribution(p);
    }

protected:
    RawCompletion do_complete(const PromptText& p, const GenConfig&) override {
        ++calls;
        return {responder_(p), std::nullopt};
    }

private:
    Responder responder_;
};

}  // namespace fixtures

namespace fixtures {

inline ProbeResult make_result(const ProbeInstance& probe, const std::string& raw) {
    ProbeResult r;
    r.instance = probe;
    r.response.raw_text = raw;
    r.response.normalized = normalize_output(raw);
    return r;
}

// Seeded mixture of exact, partial, neighbouring and garbage answers. Some
// patterns are "unskilled" and never answer exactly, so both the known and
// unknown populations are non-empty.
inline std::vector<ProbeResult> scripted_results(const Corpus& c, std::uint64_t seed) {
    std::vector<ProbeResult> out;
    for (const auto& probe : enumerate_probes(c)) {
        const auto& e = c.entry(probe.sr_id);
        Rng skill(derive_seed(seed, std::string_view("skill"), probe.sr_id, probe.pattern_index));
        const bool skilled = skill.below(4) != 0;
        Rng rng(derive_seed(seed, std::string_view("answer"), probe.key()));
        const auto& gold = probe.expected_value.name;
        const auto words = normalize_output(gold);
        std::string raw;
        switch (rng.below(skilled ? 6 : 4)) {
            case 0: raw = e.timeline[rng.below(e.timeline.size())].name; break;
            case 1: raw = words.size() > 1 ? join_words(Words(words.begin() + 1, words.end())) : "nothing"; break;
            case 2: raw = "maybe " + words.front() + " or something"; break;
            case 3: raw = rng.below(2) ? "I do not know." : "unknown"; break;
            default: raw = rng.below(2) ? gold : "The " + gold + ". Released later."; break;
        }
        out.push_back(make_result(probe, raw));
    }
    return out;
}

}  // namespace fixtures
