#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"

#include "caudit/corpus.hpp"
#include "caudit/errors.hpp"
#include "caudit/tagscore.hpp"
#include "support/oracles.hpp"
#include "support/reference_tables.hpp"

using namespace caudit;
using caudit::testing::brute_force_top;

namespace {

std::set<std::string> names(const TopTags& t) {
  std::set<std::string> s;
  for (const auto& p : t.pairs) s.insert(p.first);
  return s;
}

LabelProfile profile(const std::string& label, std::vector<WeightedTag> pairs) {
  LabelProfile p;
  p.label = label;
  p.top.pairs = std::move(pairs);
  p.top.coverage = 1.0;
  return p;
}

const auto& kRows = caudit::testing::kPairedScores;
const auto& kDeltas = caudit::testing::kPairedDeltas;

}  // namespace

TEST_SUITE("tagscore") {
  TEST_CASE("worked top-tag example") {
    const std::vector<WeightedTag> tags{{"folk", 11}, {"blues", 100}, {"blues guitar", 90}};
    const auto t = top_tags(tags);
    CHECK(names(t) == std::set<std::string>{"blues", "blues guitar"});
    CHECK(t.coverage == doctest::Approx(190.0 / 201.0));
  }

  TEST_CASE("singleton, ties and errors") {
    const std::vector<WeightedTag> one{{"jazz", 50}};
    CHECK(top_tags(one).coverage == 1.0);
    const std::vector<WeightedTag> flat{{"a", 3}, {"b", 3}, {"c", 3}};
    CHECK(top_tags(flat).pairs.size() == 3);
    // the tie at 4 pulls both in or neither
    const std::vector<WeightedTag> tie{{"a", 5}, {"b", 4}, {"c", 4}, {"d", 1}};
    CHECK(names(top_tags(tie)) == std::set<std::string>{"a", "b", "c"});
    CHECK_THROWS_AS(top_tags(std::vector<WeightedTag>{}), EmptyTagsError);
    CHECK_THROWS_AS(top_tags(std::vector<WeightedTag>{{"a", 0.0}}), EmptyTagsError);
  }

  TEST_CASE("top tags match exhaustive subset search") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + rng() % 12;
      std::vector<WeightedTag> tags;
      for (std::size_t i = 0; i < n; ++i) tags.emplace_back("t" + std::to_string(i), double(1 + rng() % 8));
      const auto got = top_tags(tags);
      CHECK(names(got) == brute_force_top(tags));
      CHECK(got.coverage > 0.5);
    }
  }

  TEST_CASE("label profile pools integer counts") {
    const Corpus c = parse_metadata("id,label,artist,title\na,rock,X,\nb,rock,Y,\nc,rock,,\n");
    const auto tags = parse_tags(R"([{"id":"a","source":"song","tags":[{"tag":"a","count":10}]},
        {"id":"b","source":"song","tags":[{"tag":"a","count":10},{"tag":"b","count":2}]},
        {"id":"c","source":"song","tags":[{"tag":"zzz","count":90}]}])",
                                 c);
    const auto p = label_profile(c, tags, "rock");
    REQUIRE(p.top.pairs.size() == 1);
    CHECK(p.top.pairs[0].first == "a");
    CHECK(p.top.pairs[0].second == doctest::Approx(20.0 / 22.0));
    CHECK(p.excerpts == 2);  // c is unidentified

    std::vector<TagCountSet> sets{{"x", {{"q", 3}, {"r", 1}}, TagSource::song}, {"y", {{"r", 4}}, TagSource::song}};
    const auto forward = label_profile("L", sets);
    std::reverse(sets.begin(), sets.end());
    const auto backward = label_profile("L", sets);
    CHECK(forward.top.pairs == backward.top.pairs);
    CHECK_THROWS_AS(label_profile("L", std::span<const TagCountSet>{}), EmptyTagsError);
  }

  TEST_CASE("label score arithmetic") {
    const auto p = profile("r", {{"a", 0.6}, {"b", 0.4}});
    CHECK(label_score(std::vector<WeightedTag>{{"a", 0.5}, {"c", 0.5}}, p) == doctest::Approx(0.30));
    CHECK(label_score(p.top.pairs, p) == doctest::Approx(0.52));
    CHECK(label_score(std::vector<WeightedTag>{{"z", 1.0}}, p) == 0.0);
  }

  TEST_CASE("score bound and scale invariance") {
    std::mt19937_64 rng(7);
    const auto p = profile("r", {{"t0", 0.5}, {"t1", 0.3}, {"t2", 0.2}});
    for (int i = 0; i < 100; ++i) {
      TagCountSet s{"x", {}, TagSource::song};
      for (int k = 0; k < 5; ++k) s.pairs.emplace_back("t" + std::to_string(k), 1 + std::int64_t(rng() % 50));
      TagCountSet scaled = s;
      for (auto& [t, c] : scaled.pairs) c *= 7;
      const double a = label_score(normalize_counts(s), p);
      CHECK(a <= 1.0);
      CHECK(a >= 0.0);
      CHECK(label_score(normalize_counts(scaled), p) == doctest::Approx(a).epsilon(1e-12));
    }
  }

  TEST_CASE("adding a matching tag raises the unnormalized sum") {
    const auto p = profile("r", {{"a", 0.7}, {"b", 0.3}});
    const std::vector<WeightedTag> before{{"a", 4.0}, {"z", 2.0}};
    const std::vector<WeightedTag> after{{"a", 4.0}, {"z", 2.0}, {"b", 1.0}};
    CHECK(label_score(after, p) > label_score(before, p));
  }

  TEST_CASE("margin rule reproduces the published table") {
    for (std::size_t g = 0; g < kRows.size(); ++g) CHECK(std::abs(delta_g(kRows[g]) - kDeltas[g]) <= 0.00005);
    CHECK(delta_g(kRows[3]) == doctest::Approx(0.00403));
    CHECK(delta_g(kRows[9]) == doctest::Approx(0.00091));
    // prose reading: row range
    CHECK(delta_g(kRows[3], DeltaRule::range) == doctest::Approx(0.00527));
    CHECK_THROWS_AS(delta_g(std::vector<double>{0.1, 0.1}), DegenerateRowError);
    CHECK_THROWS_AS(delta_g(std::vector<double>{0.1}), DegenerateRowError);
  }

  TEST_CASE("score matrix of disjoint and identical profiles") {
    std::vector<LabelProfile> disjoint{profile("a", {{"x", 1.0}}), profile("b", {{"y", 1.0}})};
    const auto m = score_matrix(disjoint);
    CHECK(m.scores[0][1] == 0.0);
    CHECK(m.scores[1][0] == 0.0);
    CHECK(m.diagonal(0) == 1.0);
    std::vector<LabelProfile> same{profile("a", {{"x", 0.6}, {"y", 0.4}}), profile("b", {{"x", 0.6}, {"y", 0.4}}),
                                   profile("c", {{"w", 1.0}})};
    const auto s = score_matrix(same);
    CHECK(s.scores[0][1] == s.scores[1][0]);
    CHECK(s.diagonal(0) == s.diagonal(1));
  }

  TEST_CASE("mislabel rules") {
    ScoreMatrix m;
    m.labels = {"disco", "pop"};
    m.scores = {{0.0527, 0.0124}, {0.0124, 0.0453}};
    m.deltas = {0.0040, 0.0033};
    const auto high = judge("disco.00011", "disco", m, {0.018, 0.06415});
    CHECK(high.flagged);
    CHECK(high.rule == MislabelRule::high_other);
    CHECK(high.best_other_label == "pop");
    const auto low = judge("d", "disco", m, {0.004, 0.0});
    CHECK(low.rule == MislabelRule::low_own);
    const auto fine = judge("d", "disco", m, {0.0527, 0.0});
    CHECK_FALSE(fine.flagged);
    CHECK(fine.rule == MislabelRule::none);
    REQUIRE(high.scores.has_value());
    CHECK(high.scores->size() == 2);
  }

  TEST_CASE("detection skips unidentified and untagged excerpts") {
    const Corpus c = parse_metadata(
        "id,label,artist,title\nr1,rock,A,\nr2,rock,B,\np1,pop,C,\np2,pop,D,\nu,pop,,\nn,rock,E,\n");
    const auto tags = parse_tags(R"([
        {"id":"r1","source":"song","tags":[{"tag":"rock","count":300}]},
        {"id":"r2","source":"song","tags":[{"tag":"pop","count":100}]},
        {"id":"p1","source":"song","tags":[{"tag":"pop","count":100}]},
        {"id":"p2","source":"song","tags":[{"tag":"pop","count":100}]},
        {"id":"u","source":"song","tags":[{"tag":"rock","count":100}]}])",
                                 c);
    const auto profiles = label_profiles(c, tags);
    const auto m = score_matrix(profiles);
    const auto v = detect_mislabelings(c, tags, profiles, m);
    std::vector<std::string> ids;
    for (const auto& x : v) ids.push_back(x.id);
    CHECK(ids == std::vector<std::string>{"p1", "p2", "r1", "r2"});
    for (const auto& x : v) CHECK(x.flagged == (x.id == "r2"));
    const auto csv = format_verdicts_csv(v);
    CHECK(csv.rfind("id,label,own_score,diagonal,best_other_label,best_other_score,delta,rule\n", 0) == 0);
  }
}
