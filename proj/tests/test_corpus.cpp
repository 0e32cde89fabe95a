#include <gtest/gtest.h>

#include "support/fixtures.hpp"

using namespace tecfap;
using fixtures::mini;

namespace {

bool has_violation(const std::vector<Violation>& v, std::string_view inv) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.invariant == inv; });
}

}  // namespace

TEST(Corpus, MiniFixtureLoads) {
    const auto c = mini();
    ASSERT_EQ(c.entries.size(), 3u);
    EXPECT_TRUE(validate(c).empty());
    EXPECT_EQ(c.entry("linkin_park_albums").timeline[1].name, "Meteora");
}

TEST(Corpus, MiniFixtureStatsMatchHandCount) {
    const auto s = stats(mini());
    EXPECT_EQ(s, fixtures::mini_stats());
    EXPECT_EQ(s.n_samples, enumerate_probes(mini()).size());
}

TEST(Corpus, EmptyCorpusStatsAreZero) { EXPECT_EQ(stats(Corpus{}), CorpusStats{}); }

TEST(Corpus, ReleaseShapedCorpus) {
    const auto c = fixtures::table1_shaped();
    EXPECT_TRUE(validate(c).empty());
    const auto s = stats(c);
    EXPECT_EQ(s.n_pairs, 66u);
    EXPECT_EQ(s.n_patterns, 1056u);
    EXPECT_EQ(s.n_forward, 528u);
    EXPECT_EQ(s.n_backward, 528u);
    EXPECT_EQ(s.n_entities, 700u);
    EXPECT_EQ(s.n_entity_types, 11u);
    EXPECT_EQ(s.min_entities_per_pair, 2u);
    EXPECT_EQ(s.max_entities_per_pair, 16u);
    EXPECT_NEAR(s.avg_entities_per_pair, 10.6, 0.05);
    EXPECT_EQ(s.n_samples, 10144u);
    EXPECT_EQ(enumerate_probes(c).size(), 10144u);
}

TEST(Corpus, RoundTripThroughSerialize) {
    const auto c = mini();
    EXPECT_EQ(load_corpus_text(serialize(c)), c);
    const auto syn = fixtures::synthetic({{2, 5, 9}, 3, 4, 9});
    EXPECT_EQ(load_corpus_text(serialize(syn)), syn);
}

TEST(Corpus, SingleEntityTimelineIsRejected) {
    auto c = mini();
    c.entries[0].timeline.resize(1);
    try {
        load_corpus_text(serialize(c));
        FAIL() << "expected a schema error";
    } catch (const SchemaError& e) {
        ASSERT_FALSE(e.violations().empty());
        EXPECT_EQ(e.violations()[0].entry_id, c.entries[0].id);
        EXPECT_EQ(e.violations()[0].invariant, "timeline has ≥ 2 entries");
    }
}

TEST(Corpus, DuplicateEntityName) {
    auto c = mini();
    c.entries[2].timeline[2].name = "the meteora";
    const auto v = validate(c);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].invariant, "entity names unique");
}

TEST(Corpus, TwoPlaceholders) {
    auto c = mini();
    c.entries[0].patterns[1].text = "After [X] and [X], the next release was";
    const auto v = validate(c);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].invariant, "exactly one placeholder");
}

TEST(Corpus, OtherInvariants) {
    auto c = mini();
    c.entries[0].timeline[0].year = 1499;
    c.entries[0].timeline[1].entity_type = "planet";
    c.entries[1].patterns[0].text = "[Y] was followed by [X] as";
    c.entries[1].patterns[1].text = "Something about [X].";
    c.entries[2].patterns[2].is_base = false;
    c.entries[2].id = c.entries[1].id;
    const auto v = validate(c);
    EXPECT_TRUE(has_violation(v, invariant::kYearRange));
    EXPECT_TRUE(has_violation(v, invariant::kEntityType));
    EXPECT_TRUE(has_violation(v, invariant::kPlaceholder));
    EXPECT_TRUE(has_violation(v, invariant::kPrefixStyle));
    EXPECT_TRUE(has_violation(v, invariant::kOneBase));
    EXPECT_TRUE(has_violation(v, invariant::kUniqueIds));
}

TEST(Corpus, YearsMustNotDecrease) {
    auto c = mini();
    std::swap(c.entries[2].timeline[0].year, c.entries[2].timeline[2].year);
    EXPECT_TRUE(has_violation(validate(c), invariant::kYearsOrdered));
}

TEST(Corpus, MalformedJsonIsParseError) {
    EXPECT_THROW(load_corpus_text("{ not json"), ParseError);
    EXPECT_THROW(load_corpus_text(R"({"version":1})"), ParseError);
    EXPECT_THROW(load_corpus_text(R"({"version":1,"entries":[{"id":"x"}]})"), ParseError);
    EXPECT_THROW(load_resource("/nonexistent/corpus.json"), DataError);
}

TEST(Corpus, BrokenFixtureFile) {
    EXPECT_THROW(load_resource(fixtures::source_path("tests/data/broken_corpus.json")), SchemaError);
}

TEST(CandidateSet, LinkinParkTimeline) {
    const auto cs = candidate_set(mini(), "linkin_park_albums");
    EXPECT_EQ(cs.candidates, (std::set<std::string>{"hybrid theory", "meteora", "minutes to midnight"}));
    EXPECT_EQ(candidate_set(mini(), "linkin_park_albums").candidates, cs.candidates);
    EXPECT_THROW(candidate_set(mini(), "nope"), NotFoundError);
}

TEST(CandidateSet, SizeEqualsTimelineLength) {
    const auto c = fixtures::table1_shaped();
    for (const auto& e : c.entries) EXPECT_EQ(candidate_set(e).candidates.size(), e.timeline.size());
}

TEST(Split, SixtySixEntriesGiveTwentyTest) {
    const auto c = fixtures::table1_shaped();
    const auto [train, test] = vertical_split(c, 0.3, 7);
    EXPECT_EQ(train.entries.size(), 46u);
    EXPECT_EQ(test.entries.size(), 20u);
}

TEST(Split, HalfOfTen) {
    const auto c = fixtures::synthetic({std::vector<std::size_t>(10, 3), 2, 2, 3});
    const auto [train, test] = vertical_split(c, 0.5, 1);
    EXPECT_EQ(train.entries.size(), 5u);
    EXPECT_EQ(test.entries.size(), 5u);
}

TEST(Split, DisjointExhaustiveDeterministicAndAdditive) {
    const auto c = fixtures::table1_shaped();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (double ratio : {0.1, 0.3, 0.5, 0.9}) {
            const auto [train, test] = vertical_split(c, ratio, seed);
            const auto again = vertical_split(c, ratio, seed);
            EXPECT_EQ(serialize(train), serialize(again.first));
            EXPECT_EQ(serialize(test), serialize(again.second));
            EXPECT_EQ(test.entries.size(), test_partition_size(ratio, c.entries.size()));

            std::set<std::string> ids;
            for (const auto& e : train.entries) ids.insert(e.id);
            for (const auto& e : test.entries) EXPECT_TRUE(ids.insert(e.id).second) << "entry in both partitions";
            EXPECT_EQ(ids.size(), c.entries.size());

            const auto a = stats(train), b = stats(test), all = stats(c);
            EXPECT_EQ(a.n_pairs + b.n_pairs, all.n_pairs);
            EXPECT_EQ(a.n_patterns + b.n_patterns, all.n_patterns);
            EXPECT_EQ(a.n_forward + b.n_forward, all.n_forward);
            EXPECT_EQ(a.n_backward + b.n_backward, all.n_backward);
            EXPECT_EQ(a.n_entities + b.n_entities, all.n_entities);
            EXPECT_EQ(a.n_samples + b.n_samples, all.n_samples);
        }
    }
}

TEST(Split, SeedChangesMembership) {
    const auto c = fixtures::table1_shaped();
    EXPECT_NE(serialize(vertical_split(c, 0.3, 1).second), serialize(vertical_split(c, 0.3, 2).second));
}

TEST(Split, Errors) {
    const auto c = mini();
    EXPECT_THROW(vertical_split(c, 0.0, 1), UsageError);
    EXPECT_THROW(vertical_split(c, 1.0, 1), UsageError);
    Corpus one;
    one.entries.push_back(c.entries[0]);
    EXPECT_THROW(vertical_split(one, 0.5, 1), DataError);
}
