#pragma once

// The seven temporally consistent factuality metrics, split by direction,
// with year-bin and entity-type breakdowns.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tecfap/backend.hpp"
#include "tecfap/corpus.hpp"
#include "tecfap/error.hpp"
#include "tecfap/probegen.hpp"
#include "tecfap/text.hpp"

namespace tecfap {

struct ProbeResult {
    ProbeInstance instance;
    ModelResponse response;
    std::optional<std::string> closed_vocab_choice;

    // What the metrics compare against gold: the closed-vocabulary choice
    // when one was made, otherwise the normalized completion.
    Words answer() const { return closed_vocab_choice ? normalize_output(*closed_vocab_choice) : response.normalized; }
};

/// Longest run of consecutive gold words that appears, contiguous and in
/// order, in the generation, divided by the gold length.
inline double soft_accuracy(const Words& gold, const Words& generated) {
    if (gold.empty()) throw UsageError("soft accuracy needs a non-empty gold answer");
    std::vector<std::size_t> prev(generated.size() + 1, 0), cur(generated.size() + 1, 0);
    std::size_t best = 0;
    for (std::size_t i = 1; i <= gold.size(); ++i) {
        for (std::size_t j = 1; j <= generated.size(); ++j) {
            cur[j] = gold[i - 1] == generated[j - 1] ? prev[j - 1] + 1 : 0;
            best = std::max(best, cur[j]);
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(best) / static_cast<double>(gold.size());
}

// Fraction of unordered response pairs that are exactly equal.
inline double group_consistency(const std::vector<Words>& responses) {
    if (responses.size() < 2) throw UsageError("consistency needs at least 2 responses");
    std::map<Words, std::size_t> counts;
    for (const auto& r : responses) ++counts[r];
    const auto n = responses.size();
    std::size_t agreeing = 0;
    for (const auto& [_, c] : counts) agreeing += c * (c - 1) / 2;
    return static_cast<double>(agreeing) / static_cast<double>(n * (n - 1) / 2);
}

// Soft accuracy of the shared answer when every response agrees, else 0.
inline double temporally_consistent_factuality(const Words& gold, const std::vector<Words>& responses) {
    if (responses.size() < 2) throw UsageError("consistency needs at least 2 responses");
    for (const auto& r : responses) {
        if (r != responses.front()) return 0.0;
    }
    return soft_accuracy(gold, responses.front());
}

struct MetricTriple {
    std::optional<double> fwd;
    std::optional<double> bwd;

    // Unweighted mean of the directions that have data.
    std::optional<double> avg() const {
        if (fwd && bwd) return (*fwd + *bwd) / 2.0;
        return fwd ? fwd : bwd;
    }

    std::optional<double> get(Direction d) const { return d == Direction::forward ? fwd : bwd; }
    void set(Direction d, std::optional<double> v) { (d == Direction::forward ? fwd : bwd) = v; }
};

// Percentages in [0, 100].
struct MetricSet {
    MetricTriple temp_fact;
    MetricTriple temp_cons;
    MetricTriple temp_cons_fact;
    MetricTriple succ_patt;
    MetricTriple succ_objs;
    MetricTriple know_cons;
    MetricTriple unk_cons;
    std::size_t n_probes = 0;
    std::size_t n_groups = 0;  // (entry, key, direction) groups with >= 2 responses
};

inline constexpr std::array<std::string_view, 7> kMetricNames = {
    "temp_fact", "temp_cons", "temp_cons_fact", "succ_patt", "succ_objs", "know_cons", "unk_cons"};

struct BinRow {
    std::string label;  // "1991-2000"
    int first_year = 0;
    int last_year = 0;
    MetricSet metrics;
};

struct TypeRow {
    std::string entity_type;
    MetricSet metrics;
};

struct MetricReport {
    MetricSet overall;
    int bin_size = 10;
    std::vector<BinRow> by_year;
    std::vector<TypeRow> by_entity_type;
};

namespace detail {

struct Member {
    std::size_t pattern_index;
    const ProbeResult* result;
    Words answer;
};

inline bool is_correct(const ProbeResult& r, const Words& answer) {
    return answer == normalize_output(r.instance.expected_value.name);
}

inline std::optional<double> mean_percent(double sum, std::size_t n) {
    if (n == 0) return std::nullopt;
    return 100.0 * sum / static_cast<double>(n);
}

inline void compute_direction(const std::vector<const ProbeResult*>& results, Direction d, MetricSet& out) {
    // Sorted containers fix the summation order, so input order never matters.
    using GroupKey = std::pair<std::string, int>;
    std::map<GroupKey, std::vector<Member>> groups;
    std::map<std::pair<std::string, std::size_t>, bool> pattern_known;
    std::map<std::pair<std::string, int>, bool> object_known;

    for (const auto* r : results) {
        const auto& inst = r->instance;
        if (inst.direction != d) continue;
        auto answer = r->answer();
        const bool correct = is_correct(*r, answer);
        groups[{inst.sr_id, inst.key_time_index}].push_back({inst.pattern_index, r, std::move(answer)});
        pattern_known[{inst.sr_id, inst.pattern_index}] |= correct;
        object_known[{inst.sr_id, inst.expected_time_index}] |= correct;
    }

    double fact = 0.0, cons = 0.0, tcf = 0.0, know = 0.0, unk = 0.0;
    std::size_t n_probes = 0, n_groups = 0, n_know = 0, n_unk = 0;
    for (auto& [key, members] : groups) {
        std::sort(members.begin(), members.end(),
                  [](const Member& a, const Member& b) { return a.pattern_index < b.pattern_index; });
        for (std::size_t i = 1; i < members.size(); ++i) {
            if (members[i].pattern_index == members[i - 1].pattern_index) {
                throw DataError("duplicate result for probe " + members[i].result->instance.key());
            }
        }
        const auto gold = normalize_output(members.front().result->instance.expected_value.name);
        std::vector<Words> all, known, unknown;
        for (const auto& m : members) {
            fact += soft_accuracy(gold, m.answer);
            ++n_probes;
            all.push_back(m.answer);
            (pattern_known[{key.first, m.pattern_index}] ? known : unknown).push_back(m.answer);
        }
        if (all.size() >= 2) {
            cons += group_consistency(all);
            tcf += temporally_consistent_factuality(gold, all);
            ++n_groups;
        }
        if (known.size() >= 2) {
            know += group_consistency(known);
            ++n_know;
        }
        if (unknown.size() >= 2) {
            unk += group_consistency(unknown);
            ++n_unk;
        }
    }

    auto share = [](const auto& flags) {
        std::size_t hit = 0;
        for (const auto& [_, ok] : flags) hit += ok ? 1 : 0;
        return mean_percent(static_cast<double>(hit), flags.size());
    };

    out.temp_fact.set(d, mean_percent(fact, n_probes));
    out.temp_cons.set(d, mean_percent(cons, n_groups));
    out.temp_cons_fact.set(d, mean_percent(tcf, n_groups));
    out.succ_patt.set(d, share(pattern_known));
    out.succ_objs.set(d, share(object_known));
    out.know_cons.set(d, mean_percent(know, n_know));
    out.unk_cons.set(d, mean_percent(unk, n_unk));
    out.n_probes += n_probes;
    out.n_groups += n_groups;
}

}  // namespace detail

inline MetricSet compute_metrics(const std::vector<const ProbeResult*>& results) {
    MetricSet out;
    detail::compute_direction(results, Direction::forward, out);
    detail::compute_direction(results, Direction::backward, out);
    return out;
}

inline MetricSet compute_metrics(const std::vector<ProbeResult>& results) {
    std::vector<const ProbeResult*> ptrs;
    ptrs.reserve(results.size());
    for (const auto& r : results) ptrs.push_back(&r);
    return compute_metrics(ptrs);
}

// Decade-style bins aligned like 1991-2000: [k*size + 1, (k+1)*size].
inline std::pair<int, int> year_bin(int year, int bin_size) {
    const int shifted = year - 1;
    int k = shifted / bin_size;
    if (shifted < 0 && shifted % bin_size != 0) --k;
    const int first = k * bin_size + 1;
    return {first, first + bin_size - 1};
}

inline std::vector<BinRow> bin_by_year(const std::vector<ProbeResult>& results, int bin_size) {
    if (bin_size < 1) throw UsageError("bin size must be at least 1 year");
    std::map<std::pair<int, int>, std::vector<const ProbeResult*>> bins;
    for (const auto& r : results) bins[year_bin(r.instance.expected_value.year, bin_size)].push_back(&r);
    std::vector<BinRow> out;
    for (const auto& [range, members] : bins) {
        out.push_back({std::to_string(range.first) + "-" + std::to_string(range.second), range.first, range.second,
                       compute_metrics(members)});
    }
    return out;
}

inline std::vector<TypeRow> by_entity_type(const std::vector<ProbeResult>& results) {
    std::map<std::string, std::vector<const ProbeResult*>> types;
    for (const auto& r : results) types[r.instance.expected_value.entity_type].push_back(&r);
    std::vector<TypeRow> out;
    for (const auto& [type, members] : types) out.push_back({type, compute_metrics(members)});
    return out;
}

inline MetricReport evaluate(const std::vector<ProbeResult>& results, int bin_size = 10) {
    if (results.empty()) throw DataError("no probe results to evaluate");
    MetricReport report;
    report.overall = compute_metrics(results);
    report.bin_size = bin_size;
    report.by_year = bin_by_year(results, bin_size);
    report.by_entity_type = by_entity_type(results);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization (column order follows the Avg/Bwd/Fwd grouping per metric)

inline std::vector<const MetricTriple*> metric_list(const MetricSet& m) {
    return {&m.temp_fact, &m.temp_cons, &m.temp_cons_fact, &m.succ_patt, &m.succ_objs, &m.know_cons, &m.unk_cons};
}

inline std::string metric_csv_header() {
    std::string h;
    for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
        for (std::string_view part : {"avg", "bwd", "fwd"}) {
            if (!h.empty()) h += ',';
            h += std::string(kMetricNames[i]) + "_" + std::string(part);
        }
    }
    return h;
}

inline std::string metric_csv_values(const MetricSet& m) {
    std::string row;
    auto cell = [&row](const std::optional<double>& v) {
        if (!row.empty()) row += ',';
        if (v) row += format_double(*v);
    };
    for (const auto* t : metric_list(m)) {
        cell(t->avg());
        cell(t->bwd);
        cell(t->fwd);
    }
    return row;
}

inline nlohmann::json to_json(const MetricSet& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json metrics = nlohmann::json::object();
    const auto list = metric_list(m);
    for (std::size_t i = 0; i < list.size(); ++i) {
        metrics[std::string(kMetricNames[i])] = {
            {"avg", opt(list[i]->avg())}, {"bwd", opt(list[i]->bwd)}, {"fwd", opt(list[i]->fwd)}};
    }
    return {{"n_probes", m.n_probes}, {"n_groups", m.n_groups}, {"metrics", std::move(metrics)}};
}

inline nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j = to_json(r.overall);
    j["bin_size"] = r.bin_size;
    j["by_year"] = nlohmann::json::array();
    for (const auto& b : r.by_year) {
        auto row = to_json(b.metrics);
        row["bin"] = b.label;
        j["by_year"].push_back(std::move(row));
    }
    j["by_entity_type"] = nlohmann::json::array();
    for (const auto& t : r.by_entity_type) {
        auto row = to_json(t.metrics);
        row["entity_type"] = t.entity_type;
        j["by_entity_type"].push_back(std::move(row));
    }
    return j;
}

inline std::string metrics_csv(const MetricReport& r) {
    return "n_probes," + metric_csv_header() + "\n" + std::to_string(r.overall.n_probes) + "," +
           metric_csv_values(r.overall) + "\n";
}

inline std::string year_bins_csv(const MetricReport& r) {
    std::string out = "bin,n_probes," + metric_csv_header() + "\n";
    for (const auto& b : r.by_year) {
        out += b.label + "," + std::to_string(b.metrics.n_probes) + "," + metric_csv_values(b.metrics) + "\n";
    }
    return out;
}

inline std::string entity_types_csv(const MetricReport& r) {
    std::string out = "entity_type,n_probes," + metric_csv_header() + "\n";
    for (const auto& t : r.by_entity_type) {
        out += csv_field(t.entity_type) + "," + std::to_string(t.metrics.n_probes) + "," +
               metric_csv_values(t.metrics) + "\n";
    }
    return out;
}

}  // namespace tecfap
