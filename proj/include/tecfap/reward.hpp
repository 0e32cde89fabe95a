#pragma once

// Time- and consistency-sensitive rewards for RL fine-tuning: the discrete
// variant mixes the sentence-completion (k1) and paraphrase (k2) rewards by
// alpha; the smooth variant penalises wrong k1 answers by their relative
// distance on the subject-relation timeline.

#include <cmath>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tecfap/corpus.hpp"
#include "tecfap/error.hpp"
#include "tecfap/text.hpp"

namespace tecfap {

inline constexpr double kDefaultAlpha = 0.66;

enum class RewardTask { k1, k2, paired };
enum class RewardMode { discrete, smooth };

struct RewardRequest {
    nlohmann::json id;  // echoed verbatim
    RewardTask task = RewardTask::k1;
    RewardMode mode = RewardMode::discrete;
    double alpha = kDefaultAlpha;

    // k1: completion and gold value object; k2: "true"/"false".
    std::string generated;
    std::string gold;
    // k2 half of a paired request.
    std::string consistency_generated;
    std::string consistency_gold;

    std::string sr_id;
    std::optional<int> key_time_index;
    std::optional<int> gold_time_index;  // t_Ol; resolved from the corpus when absent
    std::optional<int> timeline_end;     // t_n; last timeline index when absent
};

struct RewardScore {
    nlohmann::json id;
    double total = 0.0;
    double temporal_component = 0.0;
    double consistency_component = 0.0;
    bool matched = false;
    std::optional<int> t_og;
};

inline bool has_k1(RewardTask t) { return t != RewardTask::k2; }
inline bool has_k2(RewardTask t) { return t != RewardTask::k1; }

inline std::optional<int> locate_time_step(const SubjectRelationEntry& e, std::string_view text) {
    const auto needle = normalized_name(text);
    if (needle.empty()) return std::nullopt;
    for (std::size_t t = 0; t < e.timeline.size(); ++t) {
        if (normalized_name(e.timeline[t].name) == needle) return static_cast<int>(t);
    }
    return std::nullopt;
}

inline std::optional<int> locate_time_step(const Corpus& corpus, std::string_view sr_id, std::string_view text) {
    return locate_time_step(corpus.entry(sr_id), text);
}

/// Relative timeline distance of a wrong answer, in [0, 1] for indices
/// inside [0, t_n]. A zero denominator on the applicable branch yields the
/// maximal penalty 1.
inline double smooth_penalty(int t_ol, int t_og, int t_n) {
    const int dist = std::abs(t_ol - t_og);
    if (dist == 0) return 0.0;
    const int denom = t_og > t_ol ? t_n - t_ol : t_ol;
    if (denom <= 0) return 1.0;
    return static_cast<double>(dist) / static_cast<double>(denom);
}

namespace detail {

inline bool parse_bool_label(std::string_view s, std::string_view what, bool& out) {
    const auto n = normalized_name(s);
    if (n == "true") out = true;
    else if (n == "false") out = false;
    else throw DataError(std::string(what) + " must be \"true\" or \"false\"");
    return out;
}

inline double k2_component(const std::string& generated, const std::string& gold) {
    bool g = false, l = false;
    parse_bool_label(gold, "k2 gold", l);
    // An unparseable generation is simply wrong.
    const auto n = normalized_name(generated);
    if (n != "true" && n != "false") return 0.0;
    parse_bool_label(generated, "k2 generation", g);
    return g == l ? 1.0 : 0.0;
}

inline const std::string& k2_generated(const RewardRequest& r) {
    return r.task == RewardTask::paired ? r.consistency_generated : r.generated;
}
inline const std::string& k2_gold(const RewardRequest& r) {
    return r.task == RewardTask::paired ? r.consistency_gold : r.gold;
}

}  // namespace detail

inline RewardScore discrete_reward(const RewardRequest& req) {
    if (!(req.alpha >= 0.0 && req.alpha <= 1.0)) throw DataError("alpha must lie in [0, 1]");
    RewardScore s;
    s.id = req.id;
    s.matched = true;
    if (has_k1(req.task)) {
        const bool ok = normalized_name(req.generated) == normalized_name(req.gold);
        s.temporal_component = ok ? 1.0 : 0.0;
        s.matched = s.matched && ok;
    }
    if (has_k2(req.task)) {
        s.consistency_component = detail::k2_component(detail::k2_generated(req), detail::k2_gold(req));
        s.matched = s.matched && s.consistency_component == 1.0;
    }
    s.total = (1.0 - req.alpha) * s.temporal_component + req.alpha * s.consistency_component;
    return s;
}

inline RewardScore smooth_reward(const RewardRequest& req, const Corpus* corpus) {
    RewardScore s;
    s.id = req.id;
    s.matched = true;
    if (has_k1(req.task)) {
        const bool ok = normalized_name(req.generated) == normalized_name(req.gold);
        s.matched = ok;
        if (corpus == nullptr) throw DataError("smooth k1 rewards need a corpus");
        const auto& e = corpus->entry(req.sr_id);
        s.t_og = locate_time_step(e, req.generated);
        if (ok) {
            s.temporal_component = 1.0;
        } else {
            const auto t_ol = req.gold_time_index ? req.gold_time_index : locate_time_step(e, req.gold);
            if (!t_ol) throw DataError("gold '" + req.gold + "' is not on the timeline of '" + e.id + "'");
            const int t_n = req.timeline_end.value_or(e.timeline_end());
            if (*t_ol < 0 || *t_ol > t_n) throw DataError("gold time index outside [0, t_n]");
            s.temporal_component = s.t_og ? -smooth_penalty(*t_ol, *s.t_og, t_n) : -1.0;
        }
    }
    if (has_k2(req.task)) {
        s.consistency_component = detail::k2_component(detail::k2_generated(req), detail::k2_gold(req));
        s.matched = s.matched && s.consistency_component == 1.0;
    }
    s.total = s.temporal_component + s.consistency_component;
    return s;
}

inline RewardScore score_request(const RewardRequest& req, const Corpus* corpus) {
    return req.mode == RewardMode::discrete ? discrete_reward(req) : smooth_reward(req, corpus);
}

// ---------------------------------------------------------------------------
// JSON protocol

inline RewardRequest parse_reward_request(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("request must be a JSON object");
    RewardRequest r;
    r.id = j.contains("id") ? j.at("id") : nlohmann::json(nullptr);

    auto str = [&j](const char* key, bool required) -> std::string {
        if (!j.contains(key) || j.at(key).is_null()) {
            if (required) throw ParseError(std::string("missing field '") + key + "'");
            return {};
        }
        if (!j.at(key).is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
        return j.at(key).get<std::string>();
    };
    auto integer = [&j](const char* key) -> std::optional<int> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        if (!j.at(key).is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
        return j.at(key).get<int>();
    };

    const auto task = str("task", true);
    if (task == "k1") r.task = RewardTask::k1;
    else if (task == "k2") r.task = RewardTask::k2;
    else if (task == "paired") r.task = RewardTask::paired;
    else throw ParseError("task must be k1, k2 or paired");

    const auto mode = str("mode", false);
    if (mode.empty() || mode == "discrete") r.mode = RewardMode::discrete;
    else if (mode == "smooth") r.mode = RewardMode::smooth;
    else throw ParseError("mode must be discrete or smooth");

    if (j.contains("alpha") && !j.at("alpha").is_null()) {
        if (!j.at("alpha").is_number()) throw ParseError("field 'alpha' must be a number");
        r.alpha = j.at("alpha").get<double>();
        if (!(r.alpha >= 0.0 && r.alpha <= 1.0)) throw ParseError("alpha must lie in [0, 1]");
    }

    r.generated = str("generated", true);
    r.gold = str("gold", true);
    if (r.task == RewardTask::paired) {
        r.consistency_generated = str("consistency_generated", true);
        r.consistency_gold = str("consistency_gold", true);
    }
    r.sr_id = str("sr_id", r.task != RewardTask::k2 && r.mode == RewardMode::smooth);
    r.key_time_index = integer("key_time_index");
    r.gold_time_index = integer("gold_time_index");
    r.timeline_end = integer("timeline_end");
    return r;
}

inline nlohmann::json to_json(const RewardScore& s) {
    return {{"id", s.id},
            {"total", s.total},
            {"temporal_component", s.temporal_component},
            {"consistency_component", s.consistency_component},
            {"matched", s.matched},
            {"t_og", s.t_og ? nlohmann::json(*s.t_og) : nlohmann::json(nullptr)}};
}

/// Order-preserving batch scoring. The first request that cannot be scored
/// aborts the batch with its id in the message.
inline std::vector<RewardScore> score_batch(const std::vector<RewardRequest>& requests, const Corpus* corpus) {
    std::vector<RewardScore> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        try {
            out.push_back(score_request(r, corpus));
        } catch (const DataError& ex) {
            throw DataError("request " + r.id.dump() + ": " + ex.what());
        }
    }
    return out;
}

struct ServeSummary {
    std::size_t lines = 0;
    std::size_t errors = 0;
};

namespace detail {

inline nlohmann::json score_line(const std::string& line, const Corpus* corpus, bool& failed) {
    nlohmann::json id = nullptr;
    try {
        const auto j = nlohmann::json::parse(line);
        if (j.is_object() && j.contains("id")) id = j.at("id");
        failed = false;
        return to_json(score_request(parse_reward_request(j), corpus));
    } catch (const nlohmann::json::exception& ex) {
        failed = true;
        return {{"id", id}, {"error", std::string("malformed JSON: ") + ex.what()}};
    } catch (const Error& ex) {
        failed = true;
        return {{"id", id}, {"error", ex.what()}};
    }
}

}  // namespace detail

/// Line-oriented scoring service: one JSON reply per input line, in order,
/// flushed immediately. Bad lines produce {"id", "error"} and the stream
/// continues.
inline ServeSummary serve(std::istream& in, std::ostream& out, const Corpus* corpus) {
    ServeSummary summary;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool failed = false;
        out << detail::score_line(line, corpus, failed).dump() << '\n';
        out.flush();
        ++summary.lines;
        if (failed) ++summary.errors;
    }
    return summary;
}

}  // namespace tecfap
