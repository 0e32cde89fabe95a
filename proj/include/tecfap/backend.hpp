#pragma once

// Uniform text-completion interface. Concrete backends: OracleBackend
// (oracle_backend.hpp) and HttpBackend (http_backend.hpp).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tecfap/corpus.hpp"
#include "tecfap/error.hpp"
#include "tecfap/probegen.hpp"
#include "tecfap/text.hpp"

namespace tecfap {

struct GenConfig {
    int max_new_tokens = 16;
    int max_sequence_length = 256;  // prompt + completion, in token equivalents
    int top_logprobs = 0;
    int timeout_ms = 30000;
    int max_retries = 2;
    int retry_backoff_ms = 200;
    bool length_normalize = true;  // candidate scores divided by word count
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;

    friend bool operator==(const TokenLogprob&, const TokenLogprob&) = default;
};

struct TokenProb {
    std::string token;
    double probability = 0.0;

    friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

struct ModelResponse {
    std::string raw_text;
    Words normalized;
    std::optional<std::vector<TokenLogprob>> first_token_dist;
};

struct RawCompletion {
    std::string text;
    std::optional<std::vector<TokenLogprob>> first_token_dist;
};

// Whitespace-delimited pieces; a coarse, tokenizer-free token count.
inline int estimate_tokens(std::string_view text) {
    int n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = detail::is_space(c);
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

class Backend {
public:
    virtual ~Backend() = default;

    ModelResponse complete(const PromptText& prompt, const GenConfig& cfg) {
        const int prompt_tokens = estimate_tokens(prompt.full_text);
        if (prompt_tokens + cfg.max_new_tokens > cfg.max_sequence_length) {
            throw TokenBudgetError("prompt needs " + std::to_string(prompt_tokens) + "+" +
                                   std::to_string(cfg.max_new_tokens) + " tokens, budget is " +
                                   std::to_string(cfg.max_sequence_length));
        }
        auto raw = do_complete(prompt, cfg);
        ModelResponse r;
        r.normalized = normalize_output(raw.text);
        r.raw_text = std::move(raw.text);
        r.first_token_dist = std::move(raw.first_token_dist);
        return r;
    }

    virtual bool supports_scoring() const { return false; }
    virtual bool supports_logprobs() const { return false; }

    // Total log-probability of `continuation` following the prompt.
    virtual double continuation_logprob(const PromptText&, std::string_view, const GenConfig&) {
        throw UnsupportedError("backend cannot score continuations");
    }

    // Top-k log-probabilities of the first generated token.
    virtual std::vector<TokenLogprob> next_token_logprobs(const PromptText&, std::size_t, const GenConfig&) {
        throw UnsupportedError("backend does not expose log-probabilities");
    }

protected:
    virtual RawCompletion do_complete(const PromptText& prompt, const GenConfig& cfg) = 0;
};

struct ScoredCandidate {
    std::string candidate;
    double score = 0.0;

    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

/// Closed-vocabulary ranking: every candidate is scored by the log-probability
/// of its continuation (per word when length normalization is on) and the
/// list is sorted by descending score, ties broken lexicographically.
inline std::vector<ScoredCandidate> score_candidates(Backend& backend, const PromptText& prompt,
                                                     const CandidateSet& candidates, const GenConfig& cfg) {
    if (candidates.candidates.empty()) throw UsageError("candidate set is empty");
    if (!backend.supports_scoring()) throw UnsupportedError("backend cannot score continuations");

    std::vector<ScoredCandidate> out;
    for (const auto& c : candidates.candidates) {
        double score = backend.continuation_logprob(prompt, c, cfg);
        if (cfg.length_normalize) {
            const auto words = std::max<std::size_t>(1, normalize_output(c).size());
            score /= static_cast<double>(words);
        }
        if (!std::isfinite(score)) throw MalformedReplyError("non-finite score for candidate '" + c + "'");
        out.push_back({c, score});
    }
    std::sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.candidate < b.candidate;
    });
    return out;
}

inline std::vector<TokenProb> first_token_distribution(Backend& backend, const PromptText& prompt, std::size_t k,
                                                       const GenConfig& cfg) {
    if (k == 0) throw UsageError("top-k must be at least 1");
    if (!backend.supports_logprobs()) throw UnsupportedError("backend does not expose log-probabilities");

    std::vector<TokenProb> out;
    for (auto& t : backend.next_token_logprobs(prompt, k, cfg)) {
        if (!(t.logprob <= 0.0) || !std::isfinite(t.logprob)) {
            throw MalformedReplyError("invalid log-probability for token '" + t.token + "'");
        }
        const double p = std::exp(t.logprob);
        if (p > 0.0) out.push_back({std::move(t.token), p});
    }
    std::sort(out.begin(), out.end(), [](const TokenProb& a, const TokenProb& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return a.token < b.token;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

}  // namespace tecfap
