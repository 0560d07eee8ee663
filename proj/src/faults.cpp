#include "caudit/faults.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

#include "caudit/csv.hpp"
#include "caudit/errors.hpp"

namespace caudit {

using nlohmann::json;

std::string to_string(RepetitionKind k) {
  switch (k) {
    case RepetitionKind::exact: return "exact";
    case RepetitionKind::recording: return "recording";
    case RepetitionKind::artist: return "artist";
    case RepetitionKind::version: return "version";
  }
  return "exact";
}

std::string to_string(Evidence e) {
  switch (e) {
    case Evidence::fingerprint: return "fingerprint";
    case Evidence::metadata: return "metadata";
    case Evidence::manual: return "manual";
  }
  return "manual";
}

RepetitionKind parse_repetition_kind(const std::string& s) {
  if (s == "exact") return RepetitionKind::exact;
  if (s == "recording") return RepetitionKind::recording;
  if (s == "artist") return RepetitionKind::artist;
  if (s == "version") return RepetitionKind::version;
  throw ParseError("unknown repetition kind '" + s + "'");
}

Evidence parse_evidence(const std::string& s) {
  if (s == "fingerprint") return Evidence::fingerprint;
  if (s == "metadata") return Evidence::metadata;
  if (s == "manual") return Evidence::manual;
  throw ParseError("unknown evidence '" + s + "'");
}

namespace {

class UnionFind {
 public:
  std::size_t id(const std::string& s) {
    auto [it, fresh] = index_.emplace(s, parent_.size());
    if (fresh) parent_.push_back(parent_.size());
    return it->second;
  }
  std::size_t root(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(const std::string& a, const std::string& b) {
    const auto ra = root(id(a));
    const auto rb = root(id(b));
    if (ra != rb) parent_[ra] = rb;
  }
  // Components with at least min_size members, each sorted, sorted overall.
  std::vector<std::vector<std::string>> components(std::size_t min_size = 2) {
    std::map<std::size_t, std::vector<std::string>> by_root;
    for (const auto& [name, i] : index_) by_root[root(i)].push_back(name);
    std::vector<std::vector<std::string>> out;
    for (auto& [r, m] : by_root)
      if (m.size() >= min_size) {
        std::sort(m.begin(), m.end());
        out.push_back(std::move(m));
      }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<std::size_t> parent_;
};

std::vector<std::vector<std::string>> merge_overlapping(const std::vector<std::vector<std::string>>& groups) {
  UnionFind uf;
  for (const auto& g : groups) {
    for (const auto& m : g) uf.id(m);
    for (std::size_t i = 1; i < g.size(); ++i) uf.unite(g[0], g[i]);
  }
  return uf.components();
}

void require_known(const Corpus& corpus, const std::string& id, const char* what) {
  if (!corpus.contains(id)) throw UnknownExcerptError(std::string(what) + ": excerpt " + id + " not in corpus");
}

bool group_less(const RepetitionGroup& a, const RepetitionGroup& b) {
  return std::tie(a.kind, a.members) < std::tie(b.kind, b.members);
}

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

}  // namespace

std::vector<std::string> FaultCatalog::exclusions() const {
  UnionFind uf;
  for (const auto& g : repetitions) {
    if (g.kind != RepetitionKind::exact && g.kind != RepetitionKind::recording) continue;
    for (const auto& m : g.members) uf.id(m);
    for (std::size_t i = 1; i < g.members.size(); ++i) uf.unite(g.members[0], g.members[i]);
  }
  std::set<std::string> out;
  for (const auto& comp : uf.components())
    for (std::size_t i = 1; i < comp.size(); ++i) out.insert(comp[i]);
  for (const auto& d : distortions)
    if (d.usable_prefix_seconds) out.insert(d.id);
  return {out.begin(), out.end()};
}

std::vector<const RepetitionGroup*> FaultCatalog::groups_of(RepetitionKind kind) const {
  std::vector<const RepetitionGroup*> out;
  for (const auto& g : repetitions)
    if (g.kind == kind) out.push_back(&g);
  return out;
}

FaultCatalog build_catalog(const Corpus& corpus, const CatalogInputs& in) {
  FaultCatalog cat;

  for (const auto& g : in.exact_groups)
    for (const auto& id : g) require_known(corpus, id, "exact repetition");
  for (const auto& g : in.recording_groups)
    for (const auto& id : g) require_known(corpus, id, "recording repetition");
  for (const auto& d : in.distortions) require_known(corpus, d.id, "distortion");
  for (const auto& v : in.verdicts) require_known(corpus, v.id, "mislabeling");

  const auto exact = merge_overlapping(in.exact_groups);
  const auto recording = merge_overlapping(in.recording_groups);
  for (const auto& g : exact) cat.repetitions.push_back({RepetitionKind::exact, g, Evidence::fingerprint});
  for (const auto& g : recording) cat.repetitions.push_back({RepetitionKind::recording, g, Evidence::manual});

  // Same-recording components, used to tell versions from copies.
  UnionFind same;
  for (const auto* groups : {&exact, &recording})
    for (const auto& g : *groups)
      for (std::size_t i = 1; i < g.size(); ++i) same.unite(g[0], g[i]);

  std::map<std::string, std::vector<std::string>> by_artist, by_title;
  for (const auto& e : corpus.excerpts()) {
    if (!e.identified) continue;
    if (e.artist) {
      auto key = normalize_tag(*e.artist);
      if (!key.empty()) by_artist[key].push_back(e.id);
    }
    if (e.title) {
      auto key = normalize_tag(*e.title);
      if (!key.empty()) by_title[key].push_back(e.id);
    }
  }
  for (auto& [artist, ids] : by_artist) {
    if (ids.size() < 2) continue;
    std::sort(ids.begin(), ids.end());
    cat.repetitions.push_back({RepetitionKind::artist, ids, Evidence::metadata});
  }
  for (auto& [title, ids] : by_title) {
    if (ids.size() < 2) continue;
    std::set<std::size_t> roots;
    for (const auto& id : ids) roots.insert(same.root(same.id(id)));
    if (roots.size() < 2) continue;
    std::sort(ids.begin(), ids.end());
    cat.repetitions.push_back({RepetitionKind::version, ids, Evidence::metadata});
  }
  std::sort(cat.repetitions.begin(), cat.repetitions.end(), group_less);

  for (const auto& v : in.verdicts)
    if (v.flagged) cat.mislabelings.push_back(v);
  std::sort(cat.mislabelings.begin(), cat.mislabelings.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  std::map<std::string, Distortion> dist;
  for (const auto& d : in.distortions) {
    auto [it, fresh] = dist.emplace(d.id, d);
    if (!fresh) {
      if (!d.note.empty()) it->second.note += (it->second.note.empty() ? "" : "; ") + d.note;
      if (d.usable_prefix_seconds)
        it->second.usable_prefix_seconds =
            std::min(d.usable_prefix_seconds.value(), it->second.usable_prefix_seconds.value_or(d.usable_prefix_seconds.value()));
    }
  }
  for (auto& [id, d] : dist) cat.distortions.push_back(std::move(d));
  return cat;
}

std::vector<Distortion> parse_distortions(std::string_view text) {
  auto rows = csv::parse(text);
  std::vector<Distortion> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (r == 0 && !f.empty() && f[0] == "id") continue;
    if (f.size() < 2 || f.size() > 3 || f[0].empty())
      throw ParseError("distortions: expected id,note,usable_prefix_seconds", rows[r].line);
    Distortion d{f[0], f[1], std::nullopt};
    if (f.size() == 3 && !f[2].empty()) {
      try {
        std::size_t used = 0;
        d.usable_prefix_seconds = std::stod(f[2], &used);
        if (used != f[2].size() || *d.usable_prefix_seconds < 0.0) throw std::invalid_argument("bad");
      } catch (const std::exception&) {
        throw ParseError("distortions: bad usable_prefix_seconds '" + f[2] + "'", rows[r].line);
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Distortion> load_distortions(const std::filesystem::path& path) {
  return parse_distortions(csv::read_file(path));
}

std::vector<std::vector<std::string>> parse_groups(std::string_view text) {
  auto rows = csv::parse(text);
  std::map<std::string, std::vector<std::string>> groups;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (r == 0 && f.size() == 2 && f[0] == "group" && f[1] == "id") continue;
    if (f.size() != 2 || f[0].empty() || f[1].empty()) throw ParseError("groups: expected group,id", rows[r].line);
    groups[f[0]].push_back(f[1]);
  }
  std::vector<std::vector<std::string>> out;
  for (auto& [name, ids] : groups) out.push_back(std::move(ids));
  return out;
}

std::vector<std::vector<std::string>> load_groups(const std::filesystem::path& path) {
  return parse_groups(csv::read_file(path));
}

// --- JSON ------------------------------------------------------------------

namespace {

json verdict_json(const MislabelVerdict& v) {
  json j{{"id", v.id},
         {"label", v.label},
         {"own_score", v.own_score},
         {"diagonal", v.diagonal},
         {"delta", v.delta},
         {"best_other_label", v.best_other_label},
         {"best_other_score", v.best_other_score},
         {"rule", to_string(v.rule)}};
  if (v.scores) {
    json s = json::array();
    for (const auto& [label, score] : *v.scores) s.push_back({{"label", label}, {"score", score}});
    j["scores"] = std::move(s);
  } else {
    j["scores"] = nullptr;
  }
  return j;
}

MislabelVerdict verdict_from(const json& j) {
  MislabelVerdict v;
  v.id = j.at("id").get<std::string>();
  v.label = j.at("label").get<std::string>();
  v.own_score = j.value("own_score", 0.0);
  v.diagonal = j.value("diagonal", 0.0);
  v.delta = j.value("delta", 0.0);
  v.best_other_label = j.value("best_other_label", std::string());
  v.best_other_score = j.value("best_other_score", 0.0);
  v.rule = parse_mislabel_rule(j.value("rule", std::string("none")));
  v.flagged = j.value("flagged", v.rule != MislabelRule::none);
  if (j.contains("scores") && !j["scores"].is_null()) {
    std::vector<std::pair<std::string, double>> s;
    for (const auto& e : j["scores"]) s.emplace_back(e.at("label").get<std::string>(), e.at("score").get<double>());
    v.scores = std::move(s);
  }
  return v;
}

}  // namespace

std::string verdicts_to_json(std::span<const MislabelVerdict> verdicts) {
  json a = json::array();
  for (const auto& v : verdicts) {
    auto j = verdict_json(v);
    j["flagged"] = v.flagged;
    a.push_back(std::move(j));
  }
  return a.dump(2) + "\n";
}

std::vector<MislabelVerdict> verdicts_from_json(std::string_view text) {
  std::vector<MislabelVerdict> out;
  try {
    const auto doc = json::parse(text);
    const json& list = doc.is_object() ? doc.at("verdicts") : doc;
    for (const auto& v : list) out.push_back(verdict_from(v));
  } catch (const json::exception& ex) {
    throw ParseError(std::string("verdicts: ") + ex.what());
  }
  return out;
}

std::string catalog_to_json(const FaultCatalog& cat) {
  json reps = json::array();
  for (const auto& g : cat.repetitions)
    reps.push_back({{"kind", to_string(g.kind)}, {"members", g.members}, {"evidence", to_string(g.evidence)}});
  json mis = json::array();
  for (const auto& v : cat.mislabelings) mis.push_back(verdict_json(v));
  json dist = json::array();
  for (const auto& d : cat.distortions) {
    json e{{"id", d.id}, {"note", d.note}};
    e["usable_prefix_seconds"] = d.usable_prefix_seconds ? json(*d.usable_prefix_seconds) : json(nullptr);
    dist.push_back(std::move(e));
  }
  json doc{{"repetitions", reps}, {"mislabelings", mis}, {"distortions", dist}, {"exclusions", cat.exclusions()}};
  return doc.dump(2) + "\n";
}

FaultCatalog catalog_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("catalog: ") + ex.what());
  }
  FaultCatalog cat;
  try {
    for (const auto& g : doc.value("repetitions", json::array())) {
      RepetitionGroup r;
      r.kind = parse_repetition_kind(g.at("kind").get<std::string>());
      r.members = g.at("members").get<std::vector<std::string>>();
      std::sort(r.members.begin(), r.members.end());
      r.evidence = parse_evidence(g.value("evidence", std::string("manual")));
      if (r.members.size() < 2) throw ParseError("catalog: repetition group with fewer than two members");
      cat.repetitions.push_back(std::move(r));
    }
    for (const auto& v : doc.value("mislabelings", json::array())) cat.mislabelings.push_back(verdict_from(v));
    for (const auto& d : doc.value("distortions", json::array())) {
      Distortion x{d.at("id").get<std::string>(), d.value("note", std::string()), std::nullopt};
      if (d.contains("usable_prefix_seconds") && !d["usable_prefix_seconds"].is_null())
        x.usable_prefix_seconds = d["usable_prefix_seconds"].get<double>();
      cat.distortions.push_back(std::move(x));
    }
  } catch (const json::exception& ex) {
    throw ParseError(std::string("catalog: ") + ex.what());
  }
  std::sort(cat.repetitions.begin(), cat.repetitions.end(), group_less);
  return cat;
}

FaultCatalog load_catalog(const std::filesystem::path& path) { return catalog_from_json(csv::read_file(path)); }

std::string render_catalog(const FaultCatalog& cat, const Corpus* corpus) {
  // Group everything under the label of its members (or "?" without a corpus).
  auto label_of = [&](const std::string& id) -> std::string {
    if (corpus)
      if (const auto* e = corpus->find(id)) return e->label;
    auto dot = id.find('.');
    return dot == std::string::npos ? std::string("?") : id.substr(0, dot);
  };
  std::map<std::string, std::map<std::string, std::vector<std::string>>> rows;
  std::vector<std::string> order;
  auto cell = [&](const std::string& label, const std::string& column) -> std::vector<std::string>& {
    if (!rows.count(label)) order.push_back(label);
    return rows[label][column];
  };
  for (const auto& g : cat.repetitions) {
    std::set<std::string> labels;
    for (const auto& m : g.members) labels.insert(label_of(m));
    std::string text = "(";
    for (std::size_t i = 0; i < g.members.size(); ++i) text += (i ? ", " : "") + g.members[i];
    text += ")";
    for (const auto& l : labels) cell(l, to_string(g.kind)).push_back(text);
  }
  for (const auto& v : cat.mislabelings) {
    std::string text = v.id;
    if (v.rule != MislabelRule::none) text += " [" + to_string(v.rule) + "]";
    if (!v.best_other_label.empty()) text += " best other " + v.best_other_label;
    cell(label_of(v.id), "mislabeling").push_back(text);
  }
  for (const auto& d : cat.distortions) {
    std::string text = d.id + (d.note.empty() ? "" : " " + d.note);
    if (d.usable_prefix_seconds) {
      char buf[48];
      std::snprintf(buf, sizeof buf, " (usable first %.1f s)", *d.usable_prefix_seconds);
      text += buf;
    }
    cell(label_of(d.id), "distortion").push_back(text);
  }
  if (corpus) {
    std::vector<std::string> sorted;
    for (const auto& l : corpus->labels())
      if (rows.count(l)) sorted.push_back(l);
    order = sorted;
  } else {
    std::sort(order.begin(), order.end());
  }

  std::string out;
  for (const auto& label : order) {
    out += label + "\n";
    for (const char* col : {"exact", "recording", "artist", "version", "mislabeling", "distortion"}) {
      auto it = rows[label].find(col);
      if (it == rows[label].end()) continue;
      out += std::string("  ") + col + ": ";
      for (std::size_t i = 0; i < it->second.size(); ++i) out += (i ? "; " : "") + it->second[i];
      out += "\n";
    }
  }
  const auto ex = cat.exclusions();
  out += "exclusions: " + std::to_string(ex.size()) + "\n";
  return out;
}

std::pair<std::size_t, std::size_t> artist_bounds(const Corpus& corpus) {
  std::set<std::string> artists;
  std::size_t unknown = 0;
  for (const auto& e : corpus.excerpts()) {
    if (e.artist && !normalize_tag(*e.artist).empty())
      artists.insert(normalize_tag(*e.artist));
    else
      ++unknown;
  }
  return {artists.size(), artists.size() + unknown};
}

PerfectConfusion perfect_confusion(const Corpus& corpus, std::span<const MislabelVerdict> verdicts) {
  PerfectConfusion pc{ConfusionTable(corpus.labels())};
  const std::size_t k = corpus.labels().size();
  std::map<std::string, const MislabelVerdict*> flagged;
  for (const auto& v : verdicts) {
    if (!corpus.contains(v.id)) throw UnknownExcerptError("verdict for unknown excerpt " + v.id);
    if (v.flagged) flagged[v.id] = &v;
  }
  for (const auto& e : corpus.excerpts()) {
    const std::size_t g = corpus.label_index(e.label);
    auto it = flagged.find(e.id);
    if (it == flagged.end()) {
      pc.table.add(g, g);
      continue;
    }
    const MislabelVerdict& v = *it->second;
    if (!v.scores || v.scores->empty()) throw IncompleteVerdictError("verdict for " + v.id + " has no score vector");
    std::vector<double> s(k, 0.0);
    for (const auto& [label, score] : *v.scores) s[corpus.label_index(label)] = score;
    const double best = *std::max_element(s.begin(), s.end());
    if (best <= 0.0) {
      for (std::size_t r = 0; r < k; ++r) pc.table.add(g, r, 1.0 / static_cast<double>(k));
      continue;
    }
    // Every label within the significance margin of the best shares the weight.
    std::vector<std::size_t> significant;
    for (std::size_t r = 0; r < k; ++r)
      if (s[r] >= best - v.delta) significant.push_back(r);
    for (std::size_t r : significant) pc.table.add(g, r, 1.0 / static_cast<double>(significant.size()));
  }
  return pc;
}

FiguresOfMerit perfect_statistics(const PerfectConfusion& pc) {
  const auto n = pc.table.test_sizes();
  for (std::size_t g = 0; g < n.size(); ++g)
    if (n[g] <= 0.0) throw DegenerateClassError("label " + pc.table.labels[g] + " has no excerpts");
  return figures_of_merit(pc.table);
}

std::string render_confusion_report(const ConfusionTable& t, const FiguresOfMerit& fom) {
  const std::size_t k = t.size();
  const auto n = t.test_sizes();
  std::size_t w = 9;
  for (const auto& l : t.labels) w = std::max(w, l.size() + 1);
  auto pad = [&](const std::string& s) { return s + std::string(w > s.size() ? w - s.size() : 1, ' '); };
  std::string out = pad("");
  for (const auto& l : t.labels) out += pad(l);
  out += "Precision\n";
  for (std::size_t r = 0; r < k; ++r) {
    out += pad(t.labels[r]);
    for (std::size_t g = 0; g < k; ++g) out += pad(pct(n[g] > 0 ? t.counts[r][g] / n[g] : 0.0));
    out += (fom.precision[r] ? pct(*fom.precision[r]) : std::string("-")) + "\n";
  }
  out += pad("F-score");
  for (std::size_t g = 0; g < k; ++g) out += pad(fom.fscore[g] ? pct(*fom.fscore[g]) : std::string("-"));
  out += "Acc: " + pct(fom.normalized_accuracy) + "\n";
  return out;
}

ConfusionTable parse_confusion_csv(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw ParseError("confusion: empty file");
  std::vector<std::string> labels(rows[0].fields.begin() + 1, rows[0].fields.end());
  if (labels.empty()) throw ParseError("confusion: header needs label columns", rows[0].line);
  ConfusionTable t(labels);
  if (rows.size() != labels.size() + 1) throw ParseError("confusion: expected one row per label");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != labels.size() + 1 || f[0] != labels[r - 1])
      throw ParseError("confusion: row must start with label " + labels[r - 1], rows[r].line);
    for (std::size_t g = 0; g < labels.size(); ++g) {
      try {
        t.counts[r - 1][g] = std::stod(f[g + 1]);
      } catch (const std::exception&) {
        throw ParseError("confusion: bad number '" + f[g + 1] + "'", rows[r].line);
      }
    }
  }
  return t;
}

}  // namespace caudit
