#include <fstream>
#include <sstream>

#include "doctest.h"

#include "caudit/cli.hpp"
#include "caudit/corpus.hpp"
#include "caudit/features.hpp"
#include "support/synth.hpp"
#include "support/synthetic_corpus.hpp"
#include "support/tmpdir.hpp"

using namespace caudit;
using namespace caudit::testing;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string read_text(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2, help exits 0") {
    CHECK(run({}).code == kExitError);
    const auto bad = run({"eval", "run", "--bogus"});
    CHECK(bad.code == kExitError);
    CHECK_FALSE(bad.err.empty());
    CHECK(run({"frobnicate"}).code == kExitError);
    CHECK(run({"eval", "--help"}).code == kExitOk);
    CHECK(run({"partition", "make", "--metadata", "x.csv", "--scheme", "zz"}).code == kExitError);
    const auto missing = run({"catalog", "show", "--catalog", "/nonexistent/catalog.json"});
    CHECK(missing.code == kExitError);
    CHECK(missing.err.rfind("caudit: ", 0) == 0);
  }

  TEST_CASE("audit dupes on distinct clips prints only the header") {
    TempDir dir;
    std::string meta = "id,label,artist,title\n";
    for (int i = 0; i < 3; ++i) {
      const std::string id = "c" + std::to_string(i);
      write_wav(dir / (id + ".wav"), synthetic_music(40 + std::uint64_t(i), 6.0), 22050);
      meta += id + ",x,,\n";
    }
    write_text(dir / "meta.csv", meta);
    const auto r = run({"audit", "dupes", "--metadata", (dir / "meta.csv").string(), "--audio", dir.path().string(),
                        "--strict", "--format", "csv"});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "id_a,id_b,score,offset_frames\n");

    write_wav(dir / "c2.wav", synthetic_music(40, 6.0), 22050);
    const auto again = run({"audit", "dupes", "--metadata", (dir / "meta.csv").string(), "--audio",
                            dir.path().string(), "--strict", "--format", "csv"});
    CHECK(again.code == kExitFindings);
    CHECK(again.out.find("c0,c2,") != std::string::npos);
  }

  TEST_CASE("compare on identical predictions fails to reject") {
    TempDir dir;
    const std::string preds =
        "id,true_label,predicted_label,fold\na,x,x,1\nb,x,y,1\nc,y,y,2\nd,y,x,2\n";
    write_text(dir / "p.csv", preds);
    const auto r = run({"eval", "compare", (dir / "p.csv").string(), (dir / "p.csv").string(), "--format", "json"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("\"p\": 1.0") != std::string::npos);
    CHECK(r.out.find("\"decision\": \"fail to reject\"") != std::string::npos);
  }

  TEST_CASE("report perfect from a confusion csv") {
    TempDir dir;
    write_text(dir / "m.csv", ",a,b\na,9,0.5\nb,1,9.5\n");
    const auto r = run({"report", "perfect", "--confusion", (dir / "m.csv").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("Acc: 92.5") != std::string::npos);
    CHECK(run({"report", "perfect"}).code == kExitError);
  }

  TEST_CASE("partition and eval outputs are byte-identical across runs") {
    TempDir dir;
    const auto set = overlapping_classes(8, 12, 2, 1.5, 4);
    write_text(dir / "meta.csv", format_metadata(set.corpus));
    write_text(dir / "feat.csv", format_features_csv(set.features));
    const std::vector<std::string> part{"partition", "make", "--metadata", (dir / "meta.csv").string(),
                                        "--scheme", "af", "--seed", "3", "--format", "csv"};
    const auto a = run(part), b = run(part);
    CHECK(a.code == kExitOk);
    CHECK(a.out == b.out);
    CHECK(a.out.rfind("id,fold\n", 0) == 0);

    for (const std::string fmt : {"text", "json", "csv"}) {
      std::vector<std::string> ev{"eval", "run", "--metadata", (dir / "meta.csv").string(), "--features",
                                  (dir / "feat.csv").string(), "--classifier", "mmd", "--realizations", "3",
                                  "--format", fmt};
      const auto x = run(ev), y = run(ev);
      CHECK_MESSAGE(x.code == kExitOk, x.err);
      CHECK(x.out == y.out);
      CHECK_FALSE(x.out.empty());
    }

    const auto o1 = dir / "o1.json", o2 = dir / "o2.json";
    std::vector<std::string> ev{"eval", "run", "--metadata", (dir / "meta.csv").string(), "--features",
                                (dir / "feat.csv").string(), "--format", "json", "--out", o1.string()};
    CHECK(run(ev).code == kExitOk);
    ev.back() = o2.string();
    CHECK(run(ev).code == kExitOk);
    CHECK(read_text(o1) == read_text(o2));
    const auto cmp = run({"eval", "compare", o1.string(), o2.string()});
    CHECK(cmp.code == kExitOk);
    CHECK(cmp.out.find("fail to reject") != std::string::npos);
  }
}
