#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tecfap/backend.hpp"
#include "tecfap/corpus.hpp"
#include "tecfap/probegen.hpp"
#include "tecfap/rng.hpp"

namespace tecfap {

enum class ErrorModel { wrong_neighbor, random_candidate, off_corpus };
enum class InconsistencyMode { per_pattern, per_query };

inline ErrorModel parse_error_model(std::string_view s) {
    if (s == "wrong_neighbor") return ErrorModel::wrong_neighbor;
    if (s == "random_candidate") return ErrorModel::random_candidate;
    if (s == "off_corpus") return ErrorModel::off_corpus;
    throw UsageError("unknown error model '" + std::string(s) + "'");
}

inline InconsistencyMode parse_inconsistency_mode(std::string_view s) {
    if (s == "per_pattern") return InconsistencyMode::per_pattern;
    if (s == "per_query") return InconsistencyMode::per_query;
    throw UsageError("unknown inconsistency mode '" + std::string(s) + "'");
}

struct OracleConfig {
    double error_rate = 0.0;
    ErrorModel error_model = ErrorModel::wrong_neighbor;
    InconsistencyMode inconsistency_mode = InconsistencyMode::per_pattern;
    std::uint64_t seed = 0;
};

// Minimum probability the oracle assigns to any scored candidate.
inline constexpr double kOracleProbabilityFloor = 1e-12;

/// Deterministic stand-in for a model. It recognises any filled pattern of
/// its corpus and answers with the timeline neighbour the pattern asks for,
/// except for queries it decides to get wrong: with probability error_rate
/// per pattern (per_pattern) or per query (per_query), derived from
/// (seed, probe identity) only.
///
/// Queries whose key has no neighbour in the asked direction are answered
/// with an off-corpus string.
class OracleBackend final : public Backend {
public:
    struct QueryRef {
        const SubjectRelationEntry* entry = nullptr;
        std::size_t pattern_index = 0;
        int key_time_index = 0;
        Direction direction = Direction::forward;
    };

    OracleBackend(Corpus corpus, OracleConfig cfg) : corpus_(std::move(corpus)), cfg_(cfg) {
        if (!(cfg_.error_rate >= 0.0 && cfg_.error_rate <= 1.0)) throw UsageError("oracle error rate must lie in [0, 1]");
        for (const auto& e : corpus_.entries) {
            for (std::size_t pi = 0; pi < e.patterns.size(); ++pi) {
                for (int t = 0; t < static_cast<int>(e.timeline.size()); ++t) {
                    const auto q = e.patterns[pi].fill(e.timeline[static_cast<std::size_t>(t)].name);
                    index_.try_emplace(q, QueryRef{&e, pi, t, e.patterns[pi].direction});
                }
            }
        }
    }

    OracleBackend(const OracleBackend&) = delete;
    OracleBackend& operator=(const OracleBackend&) = delete;

    const OracleConfig& config() const noexcept { return cfg_; }

    bool supports_scoring() const override { return true; }
    bool supports_logprobs() const override { return true; }

    std::optional<QueryRef> resolve(const PromptText& prompt) const {
        if (auto it = index_.find(prompt.query); it != index_.end()) return it->second;
        return std::nullopt;
    }

    bool is_faulty(const QueryRef& q) const {
        const std::uint64_t h = cfg_.inconsistency_mode == InconsistencyMode::per_pattern
                                    ? derive_seed(cfg_.seed, std::string_view("fault"), q.entry->id, q.pattern_index)
                                    : derive_seed(cfg_.seed, std::string_view("fault"), q.entry->id, q.pattern_index,
                                                  q.key_time_index, static_cast<std::uint64_t>(q.direction));
        return unit_hash(h) < cfg_.error_rate;
    }

    // The surface form the oracle answers for a query.
    std::string answer(const QueryRef& q) const {
        const auto& e = *q.entry;
        const int gold = expected_index(q.direction, q.key_time_index);
        if (!valid_key_position(e, q.direction, q.key_time_index)) return "unlisted entity";
        if (!is_faulty(q)) return e.timeline[static_cast<std::size_t>(gold)].name;
        return wrong_answer(q, gold);
    }

protected:
    RawCompletion do_complete(const PromptText& prompt, const GenConfig& cfg) override {
        const auto q = require(prompt);
        RawCompletion out{answer(q), std::nullopt};
        if (cfg.top_logprobs > 0) {
            auto dist = token_logprobs(q);
            if (dist.size() > static_cast<std::size_t>(cfg.top_logprobs)) dist.resize(static_cast<std::size_t>(cfg.top_logprobs));
            out.first_token_dist = std::move(dist);
        }
        return out;
    }

public:
    // Every word of a candidate carries that candidate's probability, so the
    // length-normalized score is ln p(candidate).
    double continuation_logprob(const PromptText& prompt, std::string_view continuation, const GenConfig&) override {
        const auto q = require(prompt);
        const auto chosen = normalized_name(answer(q));
        const auto cand = normalize_output(continuation);
        const double n = static_cast<double>(q.entry->timeline.size());
        double p = join_words(cand) == chosen ? 1.0 - cfg_.error_rate : cfg_.error_rate / std::max(1.0, n - 1.0);
        p = std::max(p, kOracleProbabilityFloor);
        return static_cast<double>(std::max<std::size_t>(1, cand.size())) * std::log(p);
    }

    std::vector<TokenLogprob> next_token_logprobs(const PromptText& prompt, std::size_t k, const GenConfig&) override {
        auto dist = token_logprobs(require(prompt));
        if (dist.size() > k) dist.resize(k);
        return dist;
    }

private:
    QueryRef require(const PromptText& prompt) const {
        if (auto q = resolve(prompt)) return *q;
        throw BackendError("oracle does not recognise query '" + prompt.query + "'");
    }

    static std::string first_word(std::string_view text) {
        const auto w = normalize_output(text);
        return w.empty() ? std::string{} : w.front();
    }

    // Mass 1-eps on the chosen answer's first word, eps spread evenly over
    // the first words of the other timeline entities.
    std::vector<TokenLogprob> token_logprobs(const QueryRef& q) const {
        const auto chosen = answer(q);
        std::map<std::string, double> mass;
        mass[first_word(chosen)] += 1.0 - cfg_.error_rate;
        std::vector<std::string> others;
        for (const auto& ent : q.entry->timeline) {
            if (normalized_name(ent.name) != normalized_name(chosen)) others.push_back(first_word(ent.name));
        }
        for (const auto& w : others) mass[w] += cfg_.error_rate / static_cast<double>(others.size());

        std::vector<TokenLogprob> out;
        for (const auto& [tok, p] : mass) {
            if (p > 0.0) out.push_back({tok, std::log(p)});
        }
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.logprob > b.logprob; });
        return out;
    }

    std::string wrong_answer(const QueryRef& q, int gold) const {
        const auto& tl = q.entry->timeline;
        const int j = static_cast<int>(tl.size());
        switch (cfg_.error_model) {
            case ErrorModel::wrong_neighbor: {
                // Direction confusion first, then the nearest other entity.
                const int opposite = 2 * q.key_time_index - gold;
                if (opposite >= 0 && opposite < j) return tl[static_cast<std::size_t>(opposite)].name;
                for (int dist = 1; dist < j; ++dist) {
                    for (int idx : {gold - dist, gold + dist}) {
                        if (idx >= 0 && idx < j && idx != q.key_time_index) return tl[static_cast<std::size_t>(idx)].name;
                    }
                }
                return tl[static_cast<std::size_t>(q.key_time_index)].name;
            }
            case ErrorModel::random_candidate: {
                Rng rng(derive_seed(cfg_.seed, std::string_view("wrong"), q.entry->id, q.pattern_index,
                                    q.key_time_index, static_cast<std::uint64_t>(q.direction)));
                auto pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(j - 1)));
                if (pick >= gold) ++pick;
                return tl[static_cast<std::size_t>(pick)].name;
            }
            case ErrorModel::off_corpus:
                return "unlisted entity p" + std::to_string(q.pattern_index);
        }
        return {};
    }

    Corpus corpus_;
    OracleConfig cfg_;
    std::unordered_map<std::string, QueryRef> index_;
};

}  // namespace tecfap
