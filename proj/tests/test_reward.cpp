#include <gtest/gtest.h>

#include <sstream>

#include "support/fixtures.hpp"

using namespace tecfap;
using fixtures::mini;

namespace {

RewardRequest k1(std::string gen, std::string gold, RewardMode mode = RewardMode::discrete) {
    RewardRequest r;
    r.id = 1;
    r.task = RewardTask::k1;
    r.mode = mode;
    r.generated = std::move(gen);
    r.gold = std::move(gold);
    r.sr_id = "linkin_park_albums";
    return r;
}

RewardRequest k2(std::string gen, std::string gold) {
    RewardRequest r;
    r.id = 2;
    r.task = RewardTask::k2;
    r.generated = std::move(gen);
    r.gold = std::move(gold);
    return r;
}

}  // namespace

TEST(LocateTimeStep, Examples) {
    const auto c = mini();
    EXPECT_EQ(locate_time_step(c, "linkin_park_albums", "Meteora"), 1);
    EXPECT_EQ(locate_time_step(c, "linkin_park_albums", "the meteora."), 1);
    EXPECT_FALSE(locate_time_step(c, "linkin_park_albums", "One More Light").has_value());
    EXPECT_THROW(locate_time_step(c, "nope", "x"), NotFoundError);
    for (const auto& e : c.entries)
        for (const auto& name : candidate_set(e).candidates) EXPECT_TRUE(locate_time_step(e, name).has_value());
}

TEST(Discrete, Examples) {
    auto a = discrete_reward(k1("Meteora", "meteora"));
    EXPECT_EQ(a.temporal_component, 1.0);
    EXPECT_NEAR(a.total, 0.34, 1e-12);
    auto b = discrete_reward(k2("True", "true"));
    EXPECT_EQ(b.consistency_component, 1.0);
    EXPECT_NEAR(b.total, 0.66, 1e-12);
    RewardRequest paired = k1("Meteora", "Meteora");
    paired.task = RewardTask::paired;
    paired.consistency_generated = "false";
    paired.consistency_gold = "false";
    const auto both = discrete_reward(paired);
    EXPECT_DOUBLE_EQ(both.total, 1.0);
    EXPECT_TRUE(both.matched);
    EXPECT_EQ(discrete_reward(k1("Hybrid Theory", "Meteora")).total, 0.0);
    EXPECT_EQ(discrete_reward(k2("maybe", "true")).total, 0.0);
    EXPECT_THROW(discrete_reward(k2("true", "yes")), DataError);
}

TEST(Discrete, TotalsInUnitIntervalAndAlphaInvariantArgmax) {
    for (int a = 0; a <= 100; ++a) {
        const double alpha = a / 100.0;
        for (bool t : {false, true}) {
            for (bool cns : {false, true}) {
                RewardRequest r = k1(t ? "Meteora" : "x", "Meteora");
                r.task = RewardTask::paired;
                r.alpha = alpha;
                r.consistency_generated = cns ? "true" : "false";
                r.consistency_gold = "true";
                const auto s = discrete_reward(r);
                EXPECT_GE(s.total, 0.0);
                EXPECT_LE(s.total, 1.0 + 1e-15);
                if (alpha > 0.0 && alpha < 1.0) EXPECT_EQ(s.total == 1.0, t && cns);
            }
        }
        // Single-task k1: the correct generation always ranks first.
        auto good = k1("Meteora", "Meteora"), bad = k1("x", "Meteora");
        good.alpha = bad.alpha = alpha;
        EXPECT_GE(discrete_reward(good).total, discrete_reward(bad).total);
    }
    auto r = k1("a", "a");
    r.alpha = 1.5;
    EXPECT_THROW(discrete_reward(r), DataError);
}

TEST(Smooth, PenaltyExamples) {
    EXPECT_DOUBLE_EQ(smooth_penalty(2, 5, 10), 0.375);
    EXPECT_DOUBLE_EQ(smooth_penalty(2, 1, 10), 0.5);
    EXPECT_DOUBLE_EQ(smooth_penalty(0, 0, 4), 0.0);
    EXPECT_DOUBLE_EQ(smooth_penalty(4, 4, 4), 0.0);
}

TEST(Smooth, DegenerateDenominators) {
    // t_Og > t_Ol = t_n cannot occur on a timeline but is reachable via explicit fields.
    EXPECT_DOUBLE_EQ(smooth_penalty(3, 5, 3), 1.0);
}

TEST(Smooth, BoundedAndMonotoneExhaustive) {
    for (int tn = 0; tn <= 16; ++tn) {
        for (int tol = 0; tol <= tn; ++tol) {
            double prev_up = -1, prev_down = -1;
            for (int tog = tol + 1; tog <= tn; ++tog) {
                const double n = smooth_penalty(tol, tog, tn);
                EXPECT_GT(n, 0.0);
                EXPECT_LE(n, 1.0);
                EXPECT_GE(n, prev_up);
                prev_up = n;
            }
            for (int tog = tol - 1; tog >= 0; --tog) {
                const double n = smooth_penalty(tol, tog, tn);
                EXPECT_GT(n, 0.0);
                EXPECT_LE(n, 1.0);
                EXPECT_GE(n, prev_down);
                prev_down = n;
            }
        }
    }
}

TEST(Smooth, RewardsAgainstCorpus) {
    const auto c = mini();
    // Gold Hybrid Theory (0), generated Minutes to Midnight (2), t_n = 2.
    auto r = k1("Minutes to Midnight", "Hybrid Theory", RewardMode::smooth);
    auto s = smooth_reward(r, &c);
    EXPECT_DOUBLE_EQ(s.temporal_component, -1.0);
    EXPECT_EQ(s.t_og, 2);
    r = k1("Meteora", "Hybrid Theory", RewardMode::smooth);
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).temporal_component, -0.5);
    r = k1("Hybrid Theory", "Minutes to Midnight", RewardMode::smooth);
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).temporal_component, -1.0);
    r = k1("Meteora", "Minutes to Midnight", RewardMode::smooth);
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).temporal_component, -0.5);
    r = k1("The Meteora.", "Meteora", RewardMode::smooth);
    s = smooth_reward(r, &c);
    EXPECT_DOUBLE_EQ(s.temporal_component, 1.0);
    EXPECT_EQ(s.temporal_component, discrete_reward(k1("The Meteora.", "Meteora")).temporal_component);
    r = k1("One More Light", "Meteora", RewardMode::smooth);
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).temporal_component, -1.0);
}

TEST(Smooth, ExplicitIndicesOverrideCorpus) {
    const auto c = fixtures::synthetic({{11}, 2, 2, 1});
    const auto& e = c.entries[0];
    auto r = k1(e.timeline[5].name, e.timeline[2].name, RewardMode::smooth);
    r.sr_id = e.id;
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).temporal_component, -0.375);
    r.generated = e.timeline[1].name;
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).temporal_component, -0.5);
    r.gold_time_index = 4;
    r.timeline_end = 8;
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).temporal_component, -0.75);
}

TEST(Smooth, SumWithConsistencyAndErrors) {
    const auto c = mini();
    auto r = k1("Meteora", "Hybrid Theory", RewardMode::smooth);
    r.task = RewardTask::paired;
    r.consistency_generated = "true";
    r.consistency_gold = "true";
    EXPECT_DOUBLE_EQ(smooth_reward(r, &c).total, 0.5);
    EXPECT_THROW(smooth_reward(k1("a", "Meteora", RewardMode::smooth), nullptr), DataError);
    EXPECT_THROW(smooth_reward(k1("a", "not there", RewardMode::smooth), &c), DataError);
}

TEST(Protocol, ParseRequest) {
    const auto r = parse_reward_request(nlohmann::json::parse(
        R"({"id":"a7","task":"k1","mode":"smooth","generated":"x","gold":"y","sr_id":"s","gold_time_index":2,"timeline_end":9})"));
    EXPECT_EQ(r.id, "a7");
    EXPECT_EQ(r.mode, RewardMode::smooth);
    EXPECT_EQ(r.gold_time_index, 2);
    EXPECT_EQ(r.alpha, kDefaultAlpha);
    EXPECT_THROW(parse_reward_request(nlohmann::json::parse(R"({"task":"k3","generated":"","gold":""})")), ParseError);
    EXPECT_THROW(parse_reward_request(nlohmann::json::parse(R"({"task":"k1","gold":""})")), ParseError);
    EXPECT_THROW(parse_reward_request(nlohmann::json::parse(R"({"task":"k1","generated":"","gold":"","alpha":2})")),
                 ParseError);
    EXPECT_THROW(parse_reward_request(nlohmann::json::parse(R"([1,2])")), ParseError);
}

TEST(Batch, OrderPreservingAndMixedModes) {
    const auto c = mini();
    EXPECT_TRUE(score_batch({}, &c).empty());
    std::vector<RewardRequest> batch;
    for (int i = 0; i < 20; ++i) {
        auto r = k1(i % 3 ? "Meteora" : "Hybrid Theory", "Meteora", i % 2 ? RewardMode::smooth : RewardMode::discrete);
        r.id = i;
        batch.push_back(r);
    }
    const auto scores = score_batch(batch, &c);
    std::vector<RewardRequest> reversed(batch.rbegin(), batch.rend());
    const auto back = score_batch(reversed, &c);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        EXPECT_EQ(scores[i].id, static_cast<int>(i));
        EXPECT_EQ(to_json(scores[i]), to_json(back[back.size() - 1 - i]));
        EXPECT_EQ(scores[i].total, score_request(batch[i], &c).total);
    }
    batch[5].sr_id = "missing";
    try {
        score_batch(batch, &c);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("request 5"), std::string::npos);
    }
}

TEST(Serve, ValidMalformedValid) {
    const auto c = mini();
    std::istringstream in(
        R"({"id":1,"task":"k1","generated":"Meteora","gold":"Meteora"})"
        "\n{broken\n"
        R"({"id":3,"task":"k2","generated":"true","gold":"false"})"
        "\n"
        R"({"id":4,"task":"k9","generated":"","gold":""})"
        "\n");
    std::ostringstream out;
    const auto summary = serve(in, out, &c);
    EXPECT_EQ(summary.lines, 4u);
    EXPECT_EQ(summary.errors, 2u);
    std::istringstream lines(out.str());
    std::vector<nlohmann::json> replies;
    for (std::string l; std::getline(lines, l);) replies.push_back(nlohmann::json::parse(l));
    ASSERT_EQ(replies.size(), 4u);
    EXPECT_EQ(replies[0].at("id"), 1);
    EXPECT_NEAR(replies[0].at("total").get<double>(), 0.34, 1e-12);
    EXPECT_TRUE(replies[1].contains("error"));
    EXPECT_TRUE(replies[1].at("id").is_null());
    EXPECT_EQ(replies[2].at("total"), 0.0);
    EXPECT_EQ(replies[3].at("id"), 4);
    EXPECT_TRUE(replies[3].contains("error"));
}
