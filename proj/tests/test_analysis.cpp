#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/reference.hpp"

using namespace tecfap;
using fixtures::ScriptedBackend;

namespace {

std::vector<TokenProb> dist(std::initializer_list<std::pair<const char*, double>> xs) {
    std::vector<TokenProb> out;
    for (const auto& [t, p] : xs) out.push_back({t, p});
    return out;
}

DivergenceReport report_of(std::vector<std::tuple<std::string, double, double>> rows) {
    DivergenceReport r;
    for (auto& [id, pp, ap] : rows) {
        DivergenceRecord rec;
        rec.sr_id = id;
        rec.pp = pp;
        rec.ap = ap;
        rec.diff = ap - pp;
        r.records.push_back(rec);
    }
    r.average = divergence_report_from_json(to_json(r)).average;
    return r;
}

}  // namespace

TEST(Kl, IdenticalIsZero) {
    const auto p = dist({{"a", 0.2}, {"b", 0.5}, {"c", 0.3}});
    EXPECT_EQ(kl_divergence(p, p), 0.0);
}

TEST(Kl, TwoPoint) {
    const auto p = dist({{"a", 1.0}});
    const auto q = dist({{"a", 0.5}, {"b", 0.5}});
    EXPECT_NEAR(kl_divergence(p, q, 1e-9), std::log(2.0), 1e-7);
    EXPECT_NEAR(kl_divergence(p, q, 1e-12), std::log(2.0), 1e-9);
}

TEST(Kl, DisjointSupportsFinitePositive) {
    const double v = kl_divergence(dist({{"a", 1.0}}), dist({{"b", 1.0}}));
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
    EXPECT_THROW(kl_divergence({}, {}, 0.0), UsageError);
}

TEST(Kl, MatchesReferenceAndIsNonNegative) {
    Rng r(4);
    const char* toks[] = {"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<TokenProb> p, q;
        for (const char* t : toks) {
            if (r.below(3)) p.push_back({t, 0.01 + r.uniform()});
            if (r.below(3)) q.push_back({t, 0.01 + r.uniform()});
        }
        const double got = kl_divergence(p, q, 1e-6);
        EXPECT_GE(got, 0.0);
        EXPECT_NEAR(got, ref::kl(p, q, 1e-6), 1e-9);
    }
}

TEST(Kl, ZeroIffSmoothedDistributionsEqual) {
    // Scaled copies renormalize to the same distribution.
    EXPECT_NEAR(kl_divergence(dist({{"a", 0.2}, {"b", 0.2}}), dist({{"a", 0.5}, {"b", 0.5}})), 0.0, 1e-15);
    EXPECT_GT(kl_divergence(dist({{"a", 0.2}, {"b", 0.3}}), dist({{"a", 0.5}, {"b", 0.5}})), 0.0);
}

TEST(Study, ScriptedTwoDistributionStub) {
    const auto c = fixtures::synthetic({{3, 3, 4}, 4, 4, 6});
    const auto p = dist({{"x", 0.7}, {"y", 0.3}});
    const auto q = dist({{"x", 0.2}, {"y", 0.8}});
    ScriptedBackend b([](const PromptText&) { return ""; });
    b.distribution = [&](const PromptText& prompt) {
        const bool backward = prompt.query.find("before") != std::string::npos;
        const auto& d = backward ? q : p;
        std::vector<TokenLogprob> out;
        for (const auto& t : d) out.push_back({t.token, std::log(t.probability)});
        return out;
    };
    StudyConfig cfg;
    cfg.n_entries = 3;
    cfg.n_pairs_per_mode = 3;
    const auto r = paraphrase_divergence_study(c, b, cfg);
    ASSERT_EQ(r.records.size(), 3u);
    // Agnostic pairs compare forward with backward in both orders.
    const double expected_ap = (kl_divergence(p, q) + kl_divergence(q, p)) / 2.0;
    for (const auto& rec : r.records) {
        EXPECT_NEAR(rec.pp, 0.0, 1e-15);
        EXPECT_NEAR(rec.ap, expected_ap, 1e-12);
        EXPECT_EQ(rec.diff, rec.ap - rec.pp);
    }
}

TEST(Study, OracleShapeAndDeterminism) {
    const auto c = fixtures::synthetic({std::vector<std::size_t>(14, 4), 8, 8, 12});
    OracleBackend oracle(c, {});
    StudyConfig cfg;
    cfg.seed = 5;
    const auto a = paraphrase_divergence_study(c, oracle, cfg);
    const auto b = paraphrase_divergence_study(c, oracle, cfg);
    ASSERT_EQ(a.records.size(), 10u);
    EXPECT_EQ(divergence_csv(a), divergence_csv(b));
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    for (std::size_t i = 1; i < a.records.size(); ++i) EXPECT_LT(a.records[i - 1].sr_id, a.records[i].sr_id);
    double mean_pp = 0;
    for (const auto& rec : a.records) {
        EXPECT_EQ(rec.pp, 0.0);  // same answer, same point distribution
        EXPECT_GT(rec.ap, 0.0);
        mean_pp += rec.pp / 10.0;
    }
    EXPECT_NEAR(a.average.pp, mean_pp, 1e-12);
    const auto csv = divergence_csv(a);
    EXPECT_TRUE(csv.starts_with("entry_id,pp,ap,diff\n"));
    EXPECT_NE(csv.find("\naverage,"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
}

TEST(Study, Errors) {
    const auto c = fixtures::synthetic({{3, 3}, 4, 4, 6});
    ScriptedBackend b([](const PromptText&) { return ""; });
    EXPECT_THROW(paraphrase_divergence_study(c, b, {}), UnsupportedError);
    OracleBackend oracle(c, {});
    StudyConfig cfg;
    EXPECT_THROW(paraphrase_divergence_study(c, oracle, cfg), UsageError);  // 10 entries of 2
    cfg.n_entries = 2;
    cfg.n_pairs_per_mode = 7;  // C(4,2) = 6
    EXPECT_THROW(paraphrase_divergence_study(c, oracle, cfg), InsufficientPoolError);
}

TEST(Compare, HandValuesFromPublishedAverage) {
    const auto a = report_of({{"x", 2.47, 2.48}});
    const auto b = report_of({{"x", 2.96, 3.15}});
    const auto d = compare_reports(a, b);
    ASSERT_EQ(d.records.size(), 1u);
    EXPECT_NEAR(*d.records[0].delta, 0.18, 1e-12);
    EXPECT_NEAR(*d.average.delta, 0.18, 1e-12);
    EXPECT_EQ(d.average.diff, d.records[0].diff);
    const auto csv = divergence_csv(d);
    EXPECT_TRUE(csv.starts_with("entry_id,pp_a,ap_a,diff_a,pp_b,ap_b,diff_b,delta\n"));
}

TEST(Compare, SelfIsZeroAndMismatchFails) {
    const auto a = report_of({{"x", 1.0, 2.0}, {"y", 0.5, 0.25}});
    for (const auto& rec : compare_reports(a, a).records) EXPECT_EQ(*rec.delta, 0.0);
    EXPECT_THROW(compare_reports(a, report_of({{"x", 1.0, 2.0}})), DataError);
    EXPECT_THROW(compare_reports(a, report_of({{"x", 1.0, 2.0}, {"z", 1.0, 2.0}})), DataError);
}

TEST(Compare, AverageRowRecomputable) {
    Rng r(8);
    std::vector<std::tuple<std::string, double, double>> ra, rb;
    for (int i = 0; i < 10; ++i) {
        ra.emplace_back("e" + std::to_string(i), r.uniform(), r.uniform() * 3);
        rb.emplace_back("e" + std::to_string(i), r.uniform(), r.uniform() * 3);
    }
    const auto d = compare_reports(report_of(ra), report_of(rb));
    double delta = 0, pp = 0;
    for (const auto& rec : d.records) {
        delta += *rec.delta / 10.0;
        pp += rec.pp / 10.0;
    }
    EXPECT_NEAR(*d.average.delta, delta, 1e-12);
    EXPECT_NEAR(d.average.pp, pp, 1e-12);
}
