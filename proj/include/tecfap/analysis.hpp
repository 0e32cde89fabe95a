#pragma once

// Next-token KL divergence between positive (same intent) and agnostic
// (direction-flipped) paraphrase pairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tecfap/backend.hpp"
#include "tecfap/corpus.hpp"
#include "tecfap/error.hpp"
#include "tecfap/probegen.hpp"
#include "tecfap/rng.hpp"
#include "tecfap/text.hpp"

namespace tecfap {

inline constexpr double kDefaultKlEpsilon = 1e-9;
inline constexpr std::string_view kKlDirection = "KL(first || second)";

/// KL(p || q) in nats over the union of both supports. A token missing from
/// either side gets `epsilon` mass there, then both sides are renormalized.
inline double kl_divergence(const std::vector<TokenProb>& p, const std::vector<TokenProb>& q,
                            double epsilon = kDefaultKlEpsilon) {
    if (!(epsilon > 0.0)) throw UsageError("KL smoothing epsilon must be positive");
    std::map<std::string, std::pair<double, double>> joint;
    for (const auto& t : p) joint[t.token].first += t.probability;
    for (const auto& t : q) joint[t.token].second += t.probability;

    double zp = 0.0, zq = 0.0;
    for (auto& [_, pq] : joint) {
        if (pq.first <= 0.0) pq.first = epsilon;
        if (pq.second <= 0.0) pq.second = epsilon;
        zp += pq.first;
        zq += pq.second;
    }
    double kl = 0.0;
    for (const auto& [_, pq] : joint) {
        const double pp = pq.first / zp;
        const double qq = pq.second / zq;
        kl += pp * std::log(pp / qq);
    }
    return std::max(kl, 0.0);
}

struct DivergenceRecord {
    std::string sr_id;
    double pp = 0.0;  // mean KL over positive pairs
    double ap = 0.0;  // mean KL over agnostic pairs
    double diff = 0.0;
    std::optional<double> delta;  // diff - baseline diff, when compared

    struct Baseline {
        double pp = 0.0, ap = 0.0, diff = 0.0;
    };
    std::optional<Baseline> baseline;
};

struct DivergenceReport {
    std::vector<DivergenceRecord> records;
    DivergenceRecord average;  // sr_id "average"
    std::size_t top_k = 0;
    double epsilon = kDefaultKlEpsilon;
};

struct StudyConfig {
    std::size_t n_entries = 10;
    std::size_t n_pairs_per_mode = 5;
    std::size_t top_k = 10;
    double epsilon = kDefaultKlEpsilon;
    std::uint64_t seed = 0;
};

namespace detail {

inline DivergenceRecord average_of(const std::vector<DivergenceRecord>& rows) {
    DivergenceRecord avg;
    avg.sr_id = "average";
    if (rows.empty()) return avg;
    const double n = static_cast<double>(rows.size());
    bool has_delta = true, has_base = true;
    DivergenceRecord::Baseline base;
    double delta = 0.0;
    for (const auto& r : rows) {
        avg.pp += r.pp;
        avg.ap += r.ap;
        avg.diff += r.diff;
        has_delta = has_delta && r.delta.has_value();
        has_base = has_base && r.baseline.has_value();
        if (r.delta) delta += *r.delta;
        if (r.baseline) {
            base.pp += r.baseline->pp;
            base.ap += r.baseline->ap;
            base.diff += r.baseline->diff;
        }
    }
    avg.pp /= n;
    avg.ap /= n;
    avg.diff /= n;
    if (has_delta) avg.delta = delta / n;
    if (has_base) avg.baseline = DivergenceRecord::Baseline{base.pp / n, base.ap / n, base.diff / n};
    return avg;
}

}  // namespace detail

/// For n_entries sampled entries, every key entity and both directions:
/// draws n_pairs_per_mode positive pairs and their respective agnostic
/// pairs, compares first-token distributions with KL, and averages per entry.
/// Rows are ordered by entry id.
inline DivergenceReport paraphrase_divergence_study(const Corpus& corpus, Backend& backend, const StudyConfig& cfg,
                                                    const GenConfig& gen = {}) {
    if (!backend.supports_logprobs()) throw UnsupportedError("backend does not expose log-probabilities");
    if (cfg.n_entries == 0 || cfg.n_entries > corpus.entries.size()) {
        throw UsageError("cannot sample " + std::to_string(cfg.n_entries) + " entries from a corpus of " +
                         std::to_string(corpus.entries.size()));
    }

    Rng rng(derive_seed(cfg.seed, std::string_view("kl_entries")));
    std::vector<const SubjectRelationEntry*> chosen;
    for (auto i : rng.sample_indices(corpus.entries.size(), cfg.n_entries)) chosen.push_back(&corpus.entries[i]);
    std::sort(chosen.begin(), chosen.end(), [](auto* a, auto* b) { return a->id < b->id; });

    DivergenceReport report;
    report.top_k = cfg.top_k;
    report.epsilon = cfg.epsilon;
    for (const auto* e : chosen) {
        double pp = 0.0, ap = 0.0;
        std::size_t n_pp = 0, n_ap = 0;
        for (int t = 0; t < static_cast<int>(e->timeline.size()); ++t) {
            for (Direction d : {Direction::forward, Direction::backward}) {
                const auto pos = sample_paraphrase_pairs(corpus, e->id, t, d, PairMode::positive,
                                                         cfg.n_pairs_per_mode, cfg.seed);
                const auto agn = sample_paraphrase_pairs(corpus, e->id, t, d, PairMode::agnostic,
                                                         cfg.n_pairs_per_mode, cfg.seed);
                for (const auto& pr : pos) {
                    pp += kl_divergence(first_token_distribution(backend, pr.first, cfg.top_k, gen),
                                        first_token_distribution(backend, pr.second, cfg.top_k, gen), cfg.epsilon);
                    ++n_pp;
                }
                for (const auto& pr : agn) {
                    ap += kl_divergence(first_token_distribution(backend, pr.first, cfg.top_k, gen),
                                        first_token_distribution(backend, pr.second, cfg.top_k, gen), cfg.epsilon);
                    ++n_ap;
                }
            }
        }
        DivergenceRecord rec;
        rec.sr_id = e->id;
        rec.pp = n_pp ? pp / static_cast<double>(n_pp) : 0.0;
        rec.ap = n_ap ? ap / static_cast<double>(n_ap) : 0.0;
        rec.diff = rec.ap - rec.pp;
        report.records.push_back(std::move(rec));
    }
    report.average = detail::average_of(report.records);
    return report;
}

/// Attaches `a` as the baseline of `b`: delta = diff_b - diff_a per entry,
/// positive when b separates agnostic from positive paraphrases more widely.
inline DivergenceReport compare_reports(const DivergenceReport& a, const DivergenceReport& b) {
    if (a.records.size() != b.records.size()) throw DataError("reports cover different entries");
    DivergenceReport out = b;
    for (auto& rec : out.records) {
        auto it = std::find_if(a.records.begin(), a.records.end(), [&](const auto& r) { return r.sr_id == rec.sr_id; });
        if (it == a.records.end()) throw DataError("entry '" + rec.sr_id + "' missing from baseline report");
        rec.baseline = DivergenceRecord::Baseline{it->pp, it->ap, it->diff};
        rec.delta = rec.diff - it->diff;
    }
    out.average = detail::average_of(out.records);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string divergence_csv(const DivergenceReport& r) {
    const bool compared = !r.records.empty() && r.records.front().baseline.has_value();
    std::string out = compared ? "entry_id,pp_a,ap_a,diff_a,pp_b,ap_b,diff_b,delta\n" : "entry_id,pp,ap,diff\n";
    auto row = [&](const DivergenceRecord& rec) {
        out += csv_field(rec.sr_id);
        if (compared && rec.baseline) {
            out += "," + format_double(rec.baseline->pp) + "," + format_double(rec.baseline->ap) + "," +
                   format_double(rec.baseline->diff);
        }
        out += "," + format_double(rec.pp) + "," + format_double(rec.ap) + "," + format_double(rec.diff);
        if (compared) out += "," + (rec.delta ? format_double(*rec.delta) : std::string{});
        out += "\n";
    };
    for (const auto& rec : r.records) row(rec);
    row(r.average);
    return out;
}

inline nlohmann::json to_json(const DivergenceRecord& rec) {
    nlohmann::json j = {{"entry_id", rec.sr_id}, {"pp", rec.pp}, {"ap", rec.ap}, {"diff", rec.diff}};
    if (rec.baseline) j["baseline"] = {{"pp", rec.baseline->pp}, {"ap", rec.baseline->ap}, {"diff", rec.baseline->diff}};
    if (rec.delta) j["delta"] = *rec.delta;
    return j;
}

inline nlohmann::json to_json(const DivergenceReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& rec : r.records) rows.push_back(to_json(rec));
    return {{"kl_direction", kKlDirection},
            {"top_k", r.top_k},
            {"epsilon", r.epsilon},
            {"records", std::move(rows)},
            {"average", to_json(r.average)}};
}

inline DivergenceReport divergence_report_from_json(const nlohmann::json& j) {
    try {
        DivergenceReport r;
        r.top_k = j.value("top_k", std::size_t{0});
        r.epsilon = j.value("epsilon", kDefaultKlEpsilon);
        for (const auto& row : j.at("records")) {
            DivergenceRecord rec;
            rec.sr_id = row.at("entry_id").get<std::string>();
            rec.pp = row.at("pp").get<double>();
            rec.ap = row.at("ap").get<double>();
            rec.diff = row.at("diff").get<double>();
            r.records.push_back(std::move(rec));
        }
        r.average = detail::average_of(r.records);
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed divergence report: ") + ex.what());
    }
}

}  // namespace tecfap
