#pragma once

// Probe enumeration, zero/k-shot prompt rendering, paraphrase pair sampling
// and multi-task instruction data (sentence completion + paraphrase
// detection).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tecfap/corpus.hpp"
#include "tecfap/error.hpp"
#include "tecfap/rng.hpp"

namespace tecfap {

inline constexpr std::string_view kDefaultInstruction = "complete the given sentence with the correct phrase";
inline constexpr std::string_view kParaphraseInstruction =
    "predict whether the two given sentences are paraphrases of each other, answer true or false";

struct ProbeInstance {
    std::string sr_id;
    std::size_t pattern_index = 0;
    Direction direction = Direction::forward;
    EntityRecord key_object;
    EntityRecord expected_value;
    int key_time_index = 0;
    int expected_time_index = 0;

    // Unique per probe inside one corpus.
    std::string key() const {
        return sr_id + "|" + std::to_string(pattern_index) + "|" + std::to_string(key_time_index) + "|" +
               std::string(to_string(direction));
    }

    friend bool operator==(const ProbeInstance&, const ProbeInstance&) = default;
};

struct PromptText {
    std::string instruction;
    std::vector<std::string> shots;
    std::string query;
    std::string full_text;

    friend bool operator==(const PromptText&, const PromptText&) = default;
};

inline PromptText zero_shot_prompt(std::string query, std::string_view instruction = kDefaultInstruction) {
    PromptText p;
    p.instruction = std::string(instruction);
    p.query = std::move(query);
    p.full_text = p.instruction + ": " + p.query;
    return p;
}

inline int expected_index(Direction d, int key_index) { return d == Direction::forward ? key_index + 1 : key_index - 1; }

inline bool valid_key_position(const SubjectRelationEntry& e, Direction d, int t) {
    const int j = static_cast<int>(e.timeline.size());
    const int target = expected_index(d, t);
    return t >= 0 && t < j && target >= 0 && target < j;
}

inline ProbeInstance make_probe(const SubjectRelationEntry& e, std::size_t pattern_index, int t) {
    const auto d = e.patterns.at(pattern_index).direction;
    const int target = expected_index(d, t);
    return ProbeInstance{e.id,
                         pattern_index,
                         d,
                         e.timeline.at(static_cast<std::size_t>(t)),
                         e.timeline.at(static_cast<std::size_t>(target)),
                         t,
                         target};
}

inline std::string render_query(const SubjectRelationEntry& e, const ProbeInstance& p) {
    return e.patterns.at(p.pattern_index).fill(p.key_object.name);
}

inline std::vector<ProbeInstance> enumerate_probes(const SubjectRelationEntry& e,
                                                   std::optional<Direction> filter = std::nullopt) {
    std::vector<ProbeInstance> out;
    for (std::size_t pi = 0; pi < e.patterns.size(); ++pi) {
        const auto d = e.patterns[pi].direction;
        if (filter && *filter != d) continue;
        for (int t = 0; t < static_cast<int>(e.timeline.size()); ++t) {
            if (valid_key_position(e, d, t)) out.push_back(make_probe(e, pi, t));
        }
    }
    return out;
}

/// Every probe of the corpus, ordered by (entry id, pattern index, key index).
inline std::vector<ProbeInstance> enumerate_probes(const Corpus& corpus, std::optional<Direction> filter = std::nullopt) {
    std::vector<const SubjectRelationEntry*> order;
    for (const auto& e : corpus.entries) order.push_back(&e);
    std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::vector<ProbeInstance> out;
    for (const auto* e : order) {
        auto part = enumerate_probes(*e, filter);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

/// Renders the probe as a prompt with k solved examples from the same
/// subject-relation pair and direction. Shots never share the probe's
/// (key, answer) pair, so the answer cannot leak into the prompt.
inline PromptText render_prompt(const ProbeInstance& probe, const Corpus& corpus, std::size_t k, std::uint64_t seed,
                                std::string_view instruction = kDefaultInstruction) {
    const auto& e = corpus.entry(probe.sr_id);
    PromptText p;
    p.instruction = std::string(instruction);
    p.query = render_query(e, probe);
    if (k == 0) {
        p.full_text = p.instruction + ": " + p.query;
        return p;
    }

    std::vector<ProbeInstance> pool;
    for (auto& cand : enumerate_probes(e, probe.direction)) {
        if (cand.key_time_index != probe.key_time_index) pool.push_back(std::move(cand));
    }
    if (k > pool.size()) {
        throw InsufficientPoolError("entry '" + e.id + "' has " + std::to_string(pool.size()) + " " +
                                    std::string(to_string(probe.direction)) + " shots available, " +
                                    std::to_string(k) + " requested");
    }
    Rng rng(derive_seed(seed, std::string_view("shots"), probe.key()));
    for (auto i : rng.sample_indices(pool.size(), k)) {
        const auto& s = pool[i];
        p.shots.push_back(render_query(e, s) + " => " + s.expected_value.name);
    }

    p.full_text = p.instruction + ": ";
    for (const auto& s : p.shots) p.full_text += s + ". ";
    p.full_text += p.query + " =>";
    return p;
}

// ---------------------------------------------------------------------------
// Paraphrase pairs

enum class PairMode { positive, agnostic };

struct ParaphrasePair {
    std::size_t first_pattern = 0;
    std::size_t second_pattern = 0;
    Direction first_direction = Direction::forward;
    Direction second_direction = Direction::forward;
    PromptText first;
    PromptText second;
};

/// Samples n pairs of filled patterns for one key. Positive pairs use two
/// distinct patterns of `direction`; agnostic pairs keep the first member and
/// replace the second with its counterpart (same ordinal) among the flipped
/// direction's patterns, so equal seeds give respective positive/agnostic
/// pairs. The key need not be a valid probe position.
inline std::vector<ParaphrasePair> sample_paraphrase_pairs(const Corpus& corpus, std::string_view sr_id,
                                                           int key_time_index, Direction direction, PairMode mode,
                                                           std::size_t n, std::uint64_t seed,
                                                           std::string_view instruction = kDefaultInstruction) {
    const auto& e = corpus.entry(sr_id);
    if (key_time_index < 0 || key_time_index >= static_cast<int>(e.timeline.size())) {
        throw NotFoundError("key index " + std::to_string(key_time_index) + " outside timeline of '" + e.id + "'");
    }
    const auto same = e.patterns_in(direction);
    const auto other = e.patterns_in(flipped(direction));
    const std::size_t n_unordered = same.size() < 2 ? 0 : same.size() * (same.size() - 1) / 2;
    if (n > n_unordered || (mode == PairMode::agnostic && other.empty())) {
        throw InsufficientPoolError("entry '" + e.id + "' cannot supply " + std::to_string(n) + " " +
                                    (mode == PairMode::positive ? "positive" : "agnostic") + " pairs");
    }

    std::vector<std::pair<std::size_t, std::size_t>> unordered;  // ordinals within `same`
    for (std::size_t a = 0; a < same.size(); ++a) {
        for (std::size_t b = a + 1; b < same.size(); ++b) unordered.emplace_back(a, b);
    }

    Rng rng(derive_seed(seed, std::string_view("paraphrase_pairs"), e.id, key_time_index,
                        static_cast<std::uint64_t>(direction)));
    const auto order = rng.sample_indices(unordered.size(), unordered.size());
    const auto& key = e.timeline[static_cast<std::size_t>(key_time_index)].name;

    std::vector<ParaphrasePair> out;
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (auto idx : order) {
        if (out.size() == n) break;
        auto [a, b] = unordered[idx];
        if (rng.below(2) == 1) std::swap(a, b);

        ParaphrasePair pair;
        pair.first_pattern = same[a];
        pair.first_direction = direction;
        if (mode == PairMode::positive) {
            pair.second_pattern = same[b];
            pair.second_direction = direction;
        } else {
            pair.second_pattern = other[b % other.size()];
            pair.second_direction = flipped(direction);
        }
        const auto lo = std::min(pair.first_pattern, pair.second_pattern);
        const auto hi = std::max(pair.first_pattern, pair.second_pattern);
        if (!used.insert({lo, hi}).second) continue;

        pair.first = zero_shot_prompt(e.patterns[pair.first_pattern].fill(key), instruction);
        pair.second = zero_shot_prompt(e.patterns[pair.second_pattern].fill(key), instruction);
        out.push_back(std::move(pair));
    }
    if (out.size() < n) {
        throw InsufficientPoolError("entry '" + e.id + "' has only " + std::to_string(out.size()) +
                                    " distinct agnostic pairs");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Instruction-tuning data

enum class Task { k1, k2 };
enum class ContextMode { subject_relation_line, none };

inline std::string_view to_string(Task t) { return t == Task::k1 ? "k1" : "k2"; }

inline ContextMode parse_context_mode(std::string_view s) {
    if (s == "subject_relation_line") return ContextMode::subject_relation_line;
    if (s == "none") return ContextMode::none;
    throw UsageError("unknown context mode '" + std::string(s) + "'");
}

// Identity of one filled sentence; labels of k2 pairs derive from it.
struct SentenceRef {
    std::string sr_id;
    std::size_t pattern_index = 0;
    int key_time_index = 0;
    Direction direction = Direction::forward;

    friend bool operator==(const SentenceRef&, const SentenceRef&) = default;
};

inline bool are_paraphrases(const SentenceRef& a, const SentenceRef& b) {
    return a.sr_id == b.sr_id && a.direction == b.direction && a.key_time_index == b.key_time_index &&
           a.pattern_index != b.pattern_index;
}

struct InstructionSample {
    Task task = Task::k1;
    std::string instruction;
    std::string input;
    std::optional<std::string> context;
    std::string output;
    std::optional<std::pair<SentenceRef, SentenceRef>> pair;  // k2 provenance, not serialized
};

struct ItConfig {
    std::size_t n_k2_pairs = 0;
    double negative_ratio = 0.5;
    double hard_negative_share = 0.5;
    ContextMode context_mode = ContextMode::subject_relation_line;
    std::uint64_t seed = 0;
    std::string instruction = std::string(kDefaultInstruction);
};

inline std::string context_line(const SubjectRelationEntry& e) { return e.subject + " — " + e.relation; }

namespace detail {

inline std::string sentence_text(const Corpus& c, const SentenceRef& r) {
    const auto& e = c.entry(r.sr_id);
    return e.patterns.at(r.pattern_index).fill(e.timeline.at(static_cast<std::size_t>(r.key_time_index)).name);
}

inline std::vector<int> key_positions(const SubjectRelationEntry& e, Direction d) {
    std::vector<int> out;
    for (int t = 0; t < static_cast<int>(e.timeline.size()); ++t) {
        if (valid_key_position(e, d, t)) out.push_back(t);
    }
    return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[static_cast<std::size_t>(rng.below(v.size()))];
}

enum class PairKind { positive, hard_negative, easy_negative };

inline std::pair<SentenceRef, SentenceRef> draw_pair(const Corpus& c, PairKind kind, Rng& rng) {
    // (entry, direction) slots able to host the first sentence.
    std::vector<std::pair<const SubjectRelationEntry*, Direction>> slots;
    for (const auto& e : c.entries) {
        for (Direction d : {Direction::forward, Direction::backward}) {
            const auto pats = e.patterns_in(d);
            if (key_positions(e, d).empty() || pats.empty()) continue;
            if (kind == PairKind::positive && pats.size() < 2) continue;
            if (kind == PairKind::hard_negative && e.patterns_in(flipped(d)).empty()) continue;
            if (kind == PairKind::easy_negative && key_positions(e, d).size() < 2 && c.entries.size() < 2) continue;
            slots.emplace_back(&e, d);
        }
    }
    if (slots.empty()) throw InsufficientPoolError("corpus cannot supply the requested paraphrase pairs");

    const auto [e, d] = pick(rng, slots);
    const auto keys = key_positions(*e, d);
    const auto pats = e->patterns_in(d);
    SentenceRef a{e->id, pick(rng, pats), pick(rng, keys), d};
    SentenceRef b = a;

    switch (kind) {
        case PairKind::positive: {
            std::vector<std::size_t> rest;
            for (auto p : pats) {
                if (p != a.pattern_index) rest.push_back(p);
            }
            b.pattern_index = pick(rng, rest);
            break;
        }
        case PairKind::hard_negative:
            b.direction = flipped(d);
            b.pattern_index = pick(rng, e->patterns_in(b.direction));
            break;
        case PairKind::easy_negative: {
            const bool can_other_key = keys.size() >= 2;
            const bool can_other_entry = c.entries.size() >= 2;
            if (can_other_key && (!can_other_entry || rng.below(2) == 0)) {
                std::vector<int> rest;
                for (int t : keys) {
                    if (t != a.key_time_index) rest.push_back(t);
                }
                b.key_time_index = pick(rng, rest);
                b.pattern_index = pick(rng, pats);
            } else {
                std::vector<const SubjectRelationEntry*> others;
                for (const auto& o : c.entries) {
                    if (o.id != e->id && !o.timeline.empty() && !o.patterns.empty()) others.push_back(&o);
                }
                if (others.empty()) throw InsufficientPoolError("no second entry for an easy negative");
                const auto* o = pick(rng, others);
                b.sr_id = o->id;
                b.pattern_index = static_cast<std::size_t>(rng.below(o->patterns.size()));
                b.direction = o->patterns[b.pattern_index].direction;
                b.key_time_index = static_cast<int>(rng.below(o->timeline.size()));
            }
            break;
        }
    }
    if (rng.below(2) == 1) std::swap(a, b);
    return {a, b};
}

}  // namespace detail

inline std::vector<InstructionSample> gen_it_samples(const Corpus& corpus, const ItConfig& cfg) {
    if (!(cfg.negative_ratio >= 0.0 && cfg.negative_ratio <= 1.0) ||
        !(cfg.hard_negative_share >= 0.0 && cfg.hard_negative_share <= 1.0)) {
        throw UsageError("instruction-data ratios must lie in [0, 1]");
    }

    std::vector<InstructionSample> out;
    for (const auto& probe : enumerate_probes(corpus)) {
        const auto& e = corpus.entry(probe.sr_id);
        InstructionSample s;
        s.task = Task::k1;
        s.instruction = cfg.instruction;
        s.input = render_query(e, probe);
        if (cfg.context_mode == ContextMode::subject_relation_line) s.context = context_line(e);
        s.output = probe.expected_value.name;
        out.push_back(std::move(s));
    }

    const auto n = cfg.n_k2_pairs;
    const auto n_neg = test_partition_size(cfg.negative_ratio, n);
    const auto n_hard = test_partition_size(cfg.hard_negative_share, n_neg);
    std::vector<detail::PairKind> kinds;
    kinds.insert(kinds.end(), n - n_neg, detail::PairKind::positive);
    kinds.insert(kinds.end(), n_hard, detail::PairKind::hard_negative);
    kinds.insert(kinds.end(), n_neg - n_hard, detail::PairKind::easy_negative);

    Rng rng(derive_seed(cfg.seed, std::string_view("k2")));
    rng.shuffle(kinds);
    for (auto kind : kinds) {
        auto [a, b] = detail::draw_pair(corpus, kind, rng);
        InstructionSample s;
        s.task = Task::k2;
        s.instruction = std::string(kParaphraseInstruction);
        s.input = "sentence 1: " + detail::sentence_text(corpus, a) + "\nsentence 2: " + detail::sentence_text(corpus, b);
        s.output = are_paraphrases(a, b) ? "true" : "false";
        s.pair = std::make_pair(std::move(a), std::move(b));
        out.push_back(std::move(s));
    }
    return out;
}

inline nlohmann::json to_json(const InstructionSample& s) {
    return {{"task", to_string(s.task)},
            {"instruction", s.instruction},
            {"input", s.input},
            {"context", s.context ? nlohmann::json(*s.context) : nlohmann::json(nullptr)},
            {"output", s.output}};
}

}  // namespace tecfap
