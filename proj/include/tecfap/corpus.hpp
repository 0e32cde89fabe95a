#pragma once

// Temporally ordered subject-relation resources: schema, JSON I/O,
// validation, summary statistics, vertical splits and candidate sets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tecfap/error.hpp"
#include "tecfap/rng.hpp"
#include "tecfap/text.hpp"

namespace tecfap {

enum class Direction { forward, backward };

inline std::string_view to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

inline Direction flipped(Direction d) { return d == Direction::forward ? Direction::backward : Direction::forward; }

inline Direction parse_direction(std::string_view s) {
    if (s == "forward" || s == "fwd") return Direction::forward;
    if (s == "backward" || s == "bwd") return Direction::backward;
    throw ParseError("unknown direction '" + std::string(s) + "'");
}

inline constexpr std::array<std::string_view, 11> kEntityTypes = {
    "person", "movie", "album", "satellite", "software", "book",
    "vehicle", "song", "game", "location", "element"};

inline constexpr int kMinYear = 1500;
inline constexpr int kMaxYear = 2030;
inline constexpr std::string_view kPlaceholder = "[X]";

struct EntityRecord {
    std::string name;
    int year = 0;
    std::string entity_type;

    friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

struct Pattern {
    std::string text;  // contains kPlaceholder exactly once
    Direction direction = Direction::forward;
    bool is_base = false;

    std::string fill(std::string_view key) const {
        std::string out = text;
        const auto pos = out.find(kPlaceholder);
        if (pos != std::string::npos) out.replace(pos, kPlaceholder.size(), key);
        return out;
    }

    friend bool operator==(const Pattern&, const Pattern&) = default;
};

struct SubjectRelationEntry {
    std::string id;
    std::string subject;
    std::string relation;
    std::string domain_tag;
    std::vector<EntityRecord> timeline;  // index order is temporal order
    std::vector<Pattern> patterns;

    // Indices into `patterns` with the given direction, in stored order.
    std::vector<std::size_t> patterns_in(Direction d) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < patterns.size(); ++i) {
            if (patterns[i].direction == d) out.push_back(i);
        }
        return out;
    }

    const Pattern* base_pattern(Direction d) const {
        for (const auto& p : patterns) {
            if (p.direction == d && p.is_base) return &p;
        }
        return nullptr;
    }

    // Last timeline index (t_n).
    int timeline_end() const { return static_cast<int>(timeline.size()) - 1; }

    friend bool operator==(const SubjectRelationEntry&, const SubjectRelationEntry&) = default;
};

struct Corpus {
    int version = 1;
    std::vector<SubjectRelationEntry> entries;

    const SubjectRelationEntry* find(std::string_view id) const {
        for (const auto& e : entries) {
            if (e.id == id) return &e;
        }
        return nullptr;
    }

    const SubjectRelationEntry& entry(std::string_view id) const {
        if (const auto* e = find(id)) return *e;
        throw NotFoundError("unknown subject-relation id '" + std::string(id) + "'");
    }

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct CandidateSet {
    std::string sr_id;
    std::set<std::string> candidates;  // normalized names

    bool contains(std::string_view normalized) const { return candidates.count(std::string(normalized)) > 0; }
};

struct CorpusStats {
    std::size_t n_pairs = 0;
    std::size_t n_patterns = 0;
    std::size_t n_forward = 0;
    std::size_t n_backward = 0;
    double avg_patterns_per_pair = 0.0;
    std::size_t n_entities = 0;
    std::size_t n_entity_types = 0;
    std::size_t min_entities_per_pair = 0;
    std::size_t max_entities_per_pair = 0;
    double avg_entities_per_pair = 0.0;
    std::size_t n_samples = 0;

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

// ---------------------------------------------------------------------------
// JSON I/O

namespace detail {

template <typename T>
T required(const nlohmann::json& j, const char* key, std::string_view where) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(std::string(where) + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string(where) + ": field '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline nlohmann::json to_json(const SubjectRelationEntry& e) {
    nlohmann::json timeline = nlohmann::json::array();
    for (const auto& ent : e.timeline) {
        timeline.push_back({{"name", ent.name}, {"year", ent.year}, {"entity_type", ent.entity_type}});
    }
    nlohmann::json patterns = nlohmann::json::array();
    for (const auto& p : e.patterns) {
        patterns.push_back({{"template", p.text}, {"direction", to_string(p.direction)}, {"is_base", p.is_base}});
    }
    return {{"id", e.id},
            {"subject", e.subject},
            {"relation", e.relation},
            {"domain_tag", e.domain_tag},
            {"timeline", std::move(timeline)},
            {"patterns", std::move(patterns)}};
}

inline nlohmann::json to_json(const Corpus& c) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : c.entries) entries.push_back(to_json(e));
    return {{"version", c.version}, {"entries", std::move(entries)}};
}

inline std::string serialize(const Corpus& c) { return to_json(c).dump(2) + "\n"; }

inline SubjectRelationEntry entry_from_json(const nlohmann::json& j, std::size_t position) {
    const std::string where = "entry #" + std::to_string(position);
    SubjectRelationEntry e;
    e.id = detail::required<std::string>(j, "id", where);
    const std::string named = "entry '" + e.id + "'";
    e.subject = detail::required<std::string>(j, "subject", named);
    e.relation = detail::required<std::string>(j, "relation", named);
    e.domain_tag = j.contains("domain_tag") ? detail::required<std::string>(j, "domain_tag", named) : std::string{};

    const auto timeline = detail::required<nlohmann::json>(j, "timeline", named);
    if (!timeline.is_array()) throw ParseError(named + ": 'timeline' must be an array");
    for (const auto& t : timeline) {
        EntityRecord r;
        r.name = detail::required<std::string>(t, "name", named + " timeline");
        r.year = detail::required<int>(t, "year", named + " timeline");
        r.entity_type = detail::required<std::string>(t, "entity_type", named + " timeline");
        e.timeline.push_back(std::move(r));
    }

    const auto patterns = detail::required<nlohmann::json>(j, "patterns", named);
    if (!patterns.is_array()) throw ParseError(named + ": 'patterns' must be an array");
    for (const auto& p : patterns) {
        Pattern pat;
        pat.text = detail::required<std::string>(p, "template", named + " pattern");
        pat.direction = parse_direction(detail::required<std::string>(p, "direction", named + " pattern"));
        pat.is_base = p.contains("is_base") ? detail::required<bool>(p, "is_base", named + " pattern") : false;
        e.patterns.push_back(std::move(pat));
    }
    return e;
}

// Parses without checking invariants; see validate().
inline Corpus parse_corpus(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(std::string("malformed corpus JSON: ") + ex.what());
    }
    if (!doc.is_object()) throw ParseError("corpus document must be a JSON object");
    Corpus c;
    c.version = doc.contains("version") ? detail::required<int>(doc, "version", "corpus") : 1;
    if (c.version != 1) throw ParseError("unsupported corpus version " + std::to_string(c.version));
    const auto entries = detail::required<nlohmann::json>(doc, "entries", "corpus");
    if (!entries.is_array()) throw ParseError("corpus: 'entries' must be an array");
    for (std::size_t i = 0; i < entries.size(); ++i) c.entries.push_back(entry_from_json(entries[i], i));
    return c;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Validation

namespace invariant {
inline constexpr std::string_view kUniqueIds = "entry ids unique";
inline constexpr std::string_view kMinTimeline = "timeline has ≥ 2 entries";
inline constexpr std::string_view kYearsOrdered = "timeline years non-decreasing";
inline constexpr std::string_view kNamesUnique = "entity names unique";
inline constexpr std::string_view kNameNonEmpty = "entity name non-empty";
inline constexpr std::string_view kYearRange = "year within [1500, 2030]";
inline constexpr std::string_view kEntityType = "entity type in closed list";
inline constexpr std::string_view kPlaceholder = "exactly one placeholder";
inline constexpr std::string_view kPrefixStyle = "prefix-style template";
inline constexpr std::string_view kBothDirections = "forward and backward patterns present";
inline constexpr std::string_view kOneBase = "exactly one base pattern per direction";
}  // namespace invariant

namespace detail {

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

// Bracketed upper-case tokens such as [Y] or [SUBJ], other than [X].
inline bool has_other_placeholder(std::string_view t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != '[') continue;
        const auto close = t.find(']', i);
        if (close == std::string_view::npos || close == i + 1) continue;
        const auto inner = t.substr(i + 1, close - i - 1);
        const bool upper = std::all_of(inner.begin(), inner.end(), [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; });
        if (upper && inner != "X") return true;
    }
    return false;
}

}  // namespace detail

inline std::vector<Violation> validate(const Corpus& corpus) {
    std::vector<Violation> out;
    auto report = [&out](const std::string& id, std::string_view inv, std::string detail) {
        out.push_back({id, std::string(inv), std::move(detail)});
    };

    std::set<std::string> seen_ids;
    for (const auto& e : corpus.entries) {
        if (!seen_ids.insert(e.id).second) report(e.id, invariant::kUniqueIds, "duplicate id");

        if (e.timeline.size() < 2) {
            report(e.id, invariant::kMinTimeline, "found " + std::to_string(e.timeline.size()));
        }
        std::set<std::string> names;
        for (std::size_t t = 0; t < e.timeline.size(); ++t) {
            const auto& ent = e.timeline[t];
            const auto norm = normalized_name(ent.name);
            if (norm.empty()) report(e.id, invariant::kNameNonEmpty, "position " + std::to_string(t));
            else if (!names.insert(norm).second) report(e.id, invariant::kNamesUnique, "'" + ent.name + "'");
            if (ent.year < kMinYear || ent.year > kMaxYear) {
                report(e.id, invariant::kYearRange, "'" + ent.name + "' has year " + std::to_string(ent.year));
            }
            if (std::find(kEntityTypes.begin(), kEntityTypes.end(), ent.entity_type) == kEntityTypes.end()) {
                report(e.id, invariant::kEntityType, "'" + ent.entity_type + "'");
            }
            if (t > 0 && ent.year < e.timeline[t - 1].year) {
                report(e.id, invariant::kYearsOrdered,
                       "'" + ent.name + "' (" + std::to_string(ent.year) + ") after '" + e.timeline[t - 1].name + "'");
            }
        }

        for (std::size_t i = 0; i < e.patterns.size(); ++i) {
            const auto& p = e.patterns[i];
            const std::string where = "pattern " + std::to_string(i);
            if (detail::count_occurrences(p.text, kPlaceholder) != 1 || detail::has_other_placeholder(p.text)) {
                report(e.id, invariant::kPlaceholder, where);
                continue;
            }
            // The answer must be the continuation: nothing may close the sentence.
            std::string_view t = p.text;
            while (!t.empty() && detail::is_space(t.back())) t.remove_suffix(1);
            if (t.empty() || t.back() == '.' || t.back() == '?' || t.back() == '!' || t.ends_with(kPlaceholder)) {
                report(e.id, invariant::kPrefixStyle, where);
            }
        }

        for (Direction d : {Direction::forward, Direction::backward}) {
            const auto idx = e.patterns_in(d);
            if (idx.empty()) {
                report(e.id, invariant::kBothDirections, "no " + std::string(to_string(d)) + " pattern");
                continue;
            }
            const auto bases = std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return e.patterns[i].is_base; });
            if (bases != 1) {
                report(e.id, invariant::kOneBase,
                       std::to_string(bases) + " base " + std::string(to_string(d)) + " patterns");
            }
        }
    }
    return out;
}

inline Corpus load_corpus_text(std::string_view text) {
    Corpus c = parse_corpus(text);
    if (auto v = validate(c); !v.empty()) throw SchemaError(std::move(v));
    return c;
}

inline Corpus load_resource(const std::string& path) { return load_corpus_text(read_file(path)); }

// ---------------------------------------------------------------------------
// Derived views

inline CorpusStats stats(const Corpus& corpus) {
    CorpusStats s;
    std::set<std::string> types;
    s.n_pairs = corpus.entries.size();
    for (const auto& e : corpus.entries) {
        const auto nf = e.patterns_in(Direction::forward).size();
        const auto nb = e.patterns_in(Direction::backward).size();
        const auto j = e.timeline.size();
        s.n_forward += nf;
        s.n_backward += nb;
        s.n_entities += j;
        s.min_entities_per_pair = (s.min_entities_per_pair == 0) ? j : std::min(s.min_entities_per_pair, j);
        s.max_entities_per_pair = std::max(s.max_entities_per_pair, j);
        if (j > 0) s.n_samples += (nf + nb) * (j - 1);
        for (const auto& ent : e.timeline) types.insert(ent.entity_type);
    }
    s.n_patterns = s.n_forward + s.n_backward;
    s.n_entity_types = types.size();
    if (s.n_pairs > 0) {
        s.avg_patterns_per_pair = static_cast<double>(s.n_patterns) / static_cast<double>(s.n_pairs);
        s.avg_entities_per_pair = static_cast<double>(s.n_entities) / static_cast<double>(s.n_pairs);
    }
    return s;
}

inline nlohmann::json to_json(const CorpusStats& s) {
    return {{"n_pairs", s.n_pairs},
            {"n_patterns", s.n_patterns},
            {"n_forward", s.n_forward},
            {"n_backward", s.n_backward},
            {"avg_patterns_per_pair", s.avg_patterns_per_pair},
            {"n_entities", s.n_entities},
            {"n_entity_types", s.n_entity_types},
            {"min_entities_per_pair", s.min_entities_per_pair},
            {"max_entities_per_pair", s.max_entities_per_pair},
            {"avg_entities_per_pair", s.avg_entities_per_pair},
            {"n_samples", s.n_samples}};
}

// round-half-up(ratio * n)
inline std::size_t test_partition_size(double ratio, std::size_t n) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

/// Partitions whole subject-relation entries into (train, test). Entries keep
/// their corpus order inside each partition; membership is a pure function
/// of (corpus, ratio, seed).
inline std::pair<Corpus, Corpus> vertical_split(const Corpus& corpus, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split ratio must lie in (0, 1)");
    if (corpus.entries.size() < 2) throw DataError("vertical split needs at least 2 entries");

    const std::size_t n = corpus.entries.size();
    Rng rng(derive_seed(seed, std::string_view("vertical_split")));
    auto test_idx = rng.sample_indices(n, test_partition_size(ratio, n));
    std::vector<bool> in_test(n, false);
    for (auto i : test_idx) in_test[i] = true;

    Corpus train{corpus.version, {}};
    Corpus test{corpus.version, {}};
    for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test : train).entries.push_back(corpus.entries[i]);
    return {std::move(train), std::move(test)};
}

inline CandidateSet candidate_set(const SubjectRelationEntry& e) {
    CandidateSet cs{e.id, {}};
    for (const auto& ent : e.timeline) cs.candidates.insert(normalized_name(ent.name));
    return cs;
}

inline CandidateSet candidate_set(const Corpus& corpus, std::string_view sr_id) {
    return candidate_set(corpus.entry(sr_id));
}

}  // namespace tecfap
