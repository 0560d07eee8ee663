#include <algorithm>
#include <random>

#include "doctest.h"

#include "caudit/corpus.hpp"
#include "caudit/errors.hpp"
#include "caudit/faults.hpp"
#include "support/reference_tables.hpp"

using namespace caudit;

namespace {

Corpus small_corpus() {
  return parse_metadata(
      "id,label,artist,title\n"
      "reggae.00000,reggae,Bob Marley,Stir It Up\n"
      "reggae.00054,reggae,Bob Marley,Is This Love\n"
      "reggae.00086,reggae,,\n"
      "classical.00044,classical,Orchestra A,Symphony No. 5\n"
      "classical.00048,classical,Orchestra B,Symphony No. 5\n"
      "pop.00015,pop,Britney Spears,Song\n"
      "pop.00022,pop,britney  spears,Song\n"
      "pop.00021,pop,,\n"
      "country.00039,country,Wayne Toups,Johnnie Can't Dance\n");
}

MislabelVerdict verdict(const std::string& id, const std::string& label, std::vector<std::pair<std::string, double>> s,
                        double delta) {
  MislabelVerdict v;
  v.id = id;
  v.label = label;
  v.flagged = true;
  v.rule = MislabelRule::high_other;
  v.delta = delta;
  v.scores = std::move(s);
  return v;
}

const RepetitionGroup* only(const FaultCatalog& c, RepetitionKind k) {
  const auto g = c.groups_of(k);
  return g.size() == 1 ? g.front() : nullptr;
}

}  // namespace

TEST_SUITE("faults") {
  TEST_CASE("artist and version groups from metadata") {
    const Corpus c = small_corpus();
    CatalogInputs in;
    in.exact_groups = {{"pop.00015", "pop.00022"}};
    const auto cat = build_catalog(c, in);
    CHECK(cat.groups_of(RepetitionKind::artist).size() == 2);
    const auto* marley = cat.groups_of(RepetitionKind::artist)[1];
    CHECK(marley->members == std::vector<std::string>{"reggae.00000", "reggae.00054"});
    CHECK(marley->evidence == Evidence::metadata);
    // Same title, different performers, no fingerprint match.
    const auto* version = only(cat, RepetitionKind::version);
    REQUIRE(version != nullptr);
    CHECK(version->members == std::vector<std::string>{"classical.00044", "classical.00048"});
    // pop.00015/00022 share a title but are one exact group, so no version.
    for (const auto* g : cat.groups_of(RepetitionKind::version)) CHECK(g->members[0] != "pop.00015");
  }

  TEST_CASE("distinct metadata and no matches give an empty catalog") {
    const Corpus c = parse_metadata("id,label,artist,title\na,x,A,T1\nb,x,B,T2\nc,y,,\n");
    const auto cat = build_catalog(c, {});
    CHECK(cat.repetitions.empty());
    CHECK(cat.exclusions().empty());
  }

  TEST_CASE("unknown ids are rejected") {
    const Corpus c = small_corpus();
    CatalogInputs in;
    in.distortions = {{"nope", "static", std::nullopt}};
    CHECK_THROWS_AS(build_catalog(c, in), UnknownExcerptError);
  }

  TEST_CASE("exclusions merge exact and recording groups and keep the smallest id") {
    const Corpus c = small_corpus();
    CatalogInputs in;
    in.exact_groups = {{"pop.00022", "pop.00015"}};
    in.recording_groups = {{"pop.00021", "pop.00022"}};
    in.distortions = {{"reggae.00086", "last 25 s useless", 5.0},
                      {"country.00039", "static", std::nullopt}};
    const auto cat = build_catalog(c, in);
    CHECK(cat.exclusions() == std::vector<std::string>{"pop.00021", "pop.00022", "reggae.00086"});
  }

  TEST_CASE("catalog is independent of input order") {
    const Corpus c = small_corpus();
    CatalogInputs a;
    a.exact_groups = {{"pop.00015", "pop.00022"}, {"reggae.00000", "reggae.00054"}};
    a.recording_groups = {{"pop.00021", "pop.00015"}};
    a.verdicts = {verdict("country.00039", "country", {{"blues", 1.0}, {"country", 0.0}}, 0.01),
                  verdict("pop.00021", "pop", {{"pop", 0.0}}, 0.01)};
    a.distortions = {{"reggae.00086", "x", 5.0}, {"country.00039", "y", std::nullopt}};
    CatalogInputs b = a;
    std::reverse(b.exact_groups.begin(), b.exact_groups.end());
    for (auto& g : b.exact_groups) std::reverse(g.begin(), g.end());
    std::reverse(b.verdicts.begin(), b.verdicts.end());
    std::reverse(b.distortions.begin(), b.distortions.end());
    CHECK(catalog_to_json(build_catalog(c, a)) == catalog_to_json(build_catalog(c, b)));
  }

  TEST_CASE("json round trip") {
    const Corpus c = small_corpus();
    CatalogInputs in;
    in.exact_groups = {{"pop.00015", "pop.00022"}};
    in.verdicts = {verdict("country.00039", "country", {{"blues", 0.3}, {"country", 0.01}}, 0.01)};
    in.distortions = {{"reggae.00086", "x", 5.0}};
    const auto cat = build_catalog(c, in);
    const auto back = catalog_from_json(catalog_to_json(cat));
    CHECK(back.repetitions == cat.repetitions);
    CHECK(back.distortions == cat.distortions);
    REQUIRE(back.mislabelings.size() == 1);
    CHECK(back.mislabelings[0].scores == cat.mislabelings[0].scores);
    CHECK(catalog_to_json(back) == catalog_to_json(cat));
    CHECK_THROWS_AS(catalog_from_json("{"), ParseError);
    CHECK(render_catalog(cat, &c).find("pop\n  exact: (pop.00015, pop.00022)") != std::string::npos);
  }

  TEST_CASE("distortion and group files") {
    const auto d = parse_distortions("id,note,usable_prefix_seconds\nr,\"clipping, heavy\",\nq,useless,5\n");
    REQUIRE(d.size() == 2);
    CHECK(d[0].note == "clipping, heavy");
    CHECK_FALSE(d[0].usable_prefix_seconds.has_value());
    CHECK(d[1].usable_prefix_seconds == std::optional<double>(5.0));
    CHECK_THROWS_AS(parse_distortions("id,note,usable_prefix_seconds\nq,x,soon\n"), ParseError);
    const auto g = parse_groups("group,id\n1,a\n2,c\n1,b\n");
    CHECK(g == std::vector<std::vector<std::string>>{{"a", "b"}, {"c"}});
  }

  TEST_CASE("artist count bounds") {
    std::string meta = "id,label,artist,title\n";
    for (int i = 0; i < 248; ++i)
      for (int k = 0; k <= i % 3; ++k) meta += "a" + std::to_string(i) + "_" + std::to_string(k) + ",x,Artist " + std::to_string(i) + ",\n";
    for (int i = 0; i < 81; ++i) meta += "u" + std::to_string(i) + ",x,,\n";
    CHECK(artist_bounds(parse_metadata(meta)) == std::pair<std::size_t, std::size_t>{248, 329});
    const auto full = artist_bounds(parse_metadata("id,label,artist,title\na,x,A,\nb,x,B,\n"));
    CHECK(full.first == full.second);
    CHECK(artist_bounds(Corpus{}) == std::pair<std::size_t, std::size_t>{0, 0});
  }

  TEST_CASE("perfect confusion weights") {
    std::string meta = "id,label,artist,title\n";
    const auto& labels = caudit::testing::kGtzanLabels;
    for (const auto& l : labels)
      for (int i = 0; i < 100; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%s.%05d", l.c_str(), i);
        meta += std::string(id) + "," + l + ",A,\n";
      }
    const Corpus c = parse_metadata(meta, labels);
    auto zeros = [&] {
      std::vector<std::pair<std::string, double>> s;
      for (const auto& l : labels) s.emplace_back(l, 0.0);
      return s;
    };
    auto s39 = zeros();
    s39[0].second = 0.05;  // blues
    s39[2].second = 0.001;
    auto s40 = zeros();
    s40[4].second = 0.03;  // hip hop
    s40[7].second = 0.028; // pop, within the margin
    std::vector<MislabelVerdict> v{verdict("country.00039", "country", s39, 0.0095),
                                   verdict("hiphop.00040", "hiphop", s40, 0.0078),
                                   verdict("pop.00081", "pop", zeros(), 0.0033)};
    const auto pc = perfect_confusion(c, v);
    const auto& m = pc.table.counts;
    CHECK(m[0][2] == 1.0);
    CHECK(m[2][2] == 99.0);
    CHECK(m[4][4] == 99.5);
    CHECK(m[7][4] == 0.5);
    for (std::size_t r = 0; r < labels.size(); ++r) CHECK(m[r][7] == doctest::Approx(r == 7 ? 99.1 : 0.1));
    for (double n : pc.table.test_sizes()) CHECK(n == doctest::Approx(100.0));

    v[0].scores.reset();
    CHECK_THROWS_AS(perfect_confusion(c, v), IncompleteVerdictError);
  }

  TEST_CASE("column conservation under random verdicts") {
    const Corpus c = parse_metadata("id,label,artist,title\na,x,A,\nb,x,B,\nc,y,C,\nd,z,D,\ne,z,,\n");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<MislabelVerdict> v;
      for (const auto& e : c.excerpts()) {
        if (u(rng) < 0.5) continue;
        std::vector<std::pair<std::string, double>> s;
        for (const auto& l : c.labels()) s.emplace_back(l, u(rng) < 0.3 ? 0.0 : u(rng));
        v.push_back(verdict(e.id, e.label, s, 0.2 * u(rng)));
      }
      const auto n = perfect_confusion(c, v).table.test_sizes();
      CHECK(n[0] == doctest::Approx(2.0));
      CHECK(n[1] == doctest::Approx(1.0));
      CHECK(n[2] == doctest::Approx(2.0));
    }
  }

  TEST_CASE("perfect statistics on the published matrix and edge cases") {
    PerfectConfusion pc{ConfusionTable(caudit::testing::kGtzanLabels)};
    pc.table.counts = caudit::testing::kPerfectConfusion;
    const auto f = perfect_statistics(pc);
    CHECK(*f.precision[9] == doctest::Approx(75.0 / 87.1));
    CHECK(*f.fscore[9] == doctest::Approx(0.8017).epsilon(1e-3));
    CHECK(f.normalized_accuracy == doctest::Approx(0.9451));

    PerfectConfusion id{ConfusionTable({"a", "b"})};
    id.table.counts = {{3, 0}, {0, 4}};
    const auto one = perfect_statistics(id);
    CHECK(one.normalized_accuracy == 1.0);
    CHECK(*one.precision[0] == 1.0);
    CHECK(*one.fscore[1] == 1.0);

    id.table.counts = {{3, 0}, {0, 0}};
    CHECK_THROWS_AS(perfect_statistics(id), DegenerateClassError);
  }

  TEST_CASE("confusion csv and rendering") {
    const auto t = parse_confusion_csv(",a,b\na,9,0.5\nb,1,9.5\n");
    CHECK(t.counts[0][1] == 0.5);
    const auto text = render_confusion_report(t, figures_of_merit(t));
    CHECK(text.find("Acc: 92.5") != std::string::npos);
    CHECK_THROWS_AS(parse_confusion_csv(",a,b\nb,1,2\na,3,4\n"), ParseError);
  }
}
