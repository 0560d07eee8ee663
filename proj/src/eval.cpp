#include "caudit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

#include "caudit/csv.hpp"
#include "caudit/errors.hpp"
#include "caudit/parallel.hpp"

namespace caudit {

using nlohmann::json;

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::st: return "st";
    case Scheme::st_prime: return "st-prime";
    case Scheme::af: return "af";
    case Scheme::af_prime: return "af-prime";
    case Scheme::kfold: return "kfold";
    case Scheme::split: return "split";
  }
  return "st";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "st") return Scheme::st;
  if (s == "st-prime" || s == "stp") return Scheme::st_prime;
  if (s == "af") return Scheme::af;
  if (s == "af-prime" || s == "afp") return Scheme::af_prime;
  if (s == "kfold") return Scheme::kfold;
  if (s == "split") return Scheme::split;
  throw Error("unknown scheme '" + s + "' (st, st-prime, af, af-prime, kfold, split)");
}

std::vector<std::string> Partition::included() const {
  std::vector<std::string> out;
  for (const auto& f : folds) out.insert(out.end(), f.begin(), f.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::string artist_key(const Excerpt& e) {
  if (!e.identified || !e.artist) return {};
  return normalize_tag(*e.artist);
}

namespace {

std::mt19937_64 partition_rng(std::uint64_t seed, std::size_t realization) {
  return std::mt19937_64(derive_seed(seed, realization));
}

std::vector<std::string> sorted_ids(const Corpus& corpus) {
  std::vector<std::string> ids;
  for (const auto& e : corpus.excerpts()) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

Partition halves(const Corpus& corpus, std::uint64_t seed, std::size_t realization) {
  auto ids = sorted_ids(corpus);
  auto rng = partition_rng(seed, realization);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t first = (ids.size() + 1) / 2;
  Partition p;
  p.folds.emplace_back(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(first));
  p.folds.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(first), ids.end());
  for (auto& f : p.folds) std::sort(f.begin(), f.end());
  return p;
}

struct Group {
  std::string name;
  std::vector<std::string> members;
  std::vector<std::size_t> per_label;
  std::size_t labels_used = 0;
};

// Whole groups go to one fold. Groups spanning several labels are placed
// greedily first; then, label by label, single-label groups are split with
// an exact subset-sum so that the label's imbalance is as small as possible.
Partition artist_filtered(const Corpus& corpus, std::uint64_t seed, std::size_t realization) {
  const std::size_t k = corpus.labels().size();
  std::map<std::string, Group> by_name;
  for (const auto& e : corpus.excerpts()) {
    std::string key = artist_key(e);
    key = key.empty() ? "\x01" + e.id : "\x02" + key;  // unidentified excerpts stand alone
    auto& g = by_name[key];
    if (g.members.empty()) {
      g.name = key;
      g.per_label.assign(k, 0);
    }
    g.members.push_back(e.id);
    ++g.per_label[corpus.label_index(e.label)];
  }
  std::vector<Group> groups;
  for (auto& [name, g] : by_name) {
    g.labels_used = static_cast<std::size_t>(std::count_if(g.per_label.begin(), g.per_label.end(), [](auto c) { return c > 0; }));
    groups.push_back(std::move(g));
  }
  auto rng = partition_rng(seed, realization);
  std::shuffle(groups.begin(), groups.end(), rng);

  std::vector<std::vector<long>> count(2, std::vector<long>(k, 0));
  std::vector<int> side(groups.size(), -1);
  auto place = [&](std::size_t i, int f) {
    side[i] = f;
    for (std::size_t c = 0; c < k; ++c) count[static_cast<std::size_t>(f)][c] += static_cast<long>(groups[i].per_label[c]);
  };

  std::vector<std::size_t> multi;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].labels_used > 1) multi.push_back(i);
  std::stable_sort(multi.begin(), multi.end(),
                   [&](std::size_t a, std::size_t b) { return groups[a].members.size() > groups[b].members.size(); });
  for (std::size_t i : multi) {
    long cost[2];
    for (int f = 0; f < 2; ++f) {
      cost[f] = 0;
      for (std::size_t c = 0; c < k; ++c) {
        long d = count[0][c] - count[1][c];
        d += (f == 0 ? 1 : -1) * static_cast<long>(groups[i].per_label[c]);
        cost[f] += std::labs(d);
      }
    }
    int f = cost[0] < cost[1] ? 0 : cost[1] < cost[0] ? 1 : static_cast<int>(rng() & 1);
    place(i, f);
  }

  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> items;
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i].labels_used == 1 && groups[i].per_label[c] > 0) items.push_back(i);
    if (items.empty()) continue;
    std::size_t total = 0;
    for (std::size_t i : items) total += groups[i].per_label[c];
    // reach[s] = index+1 of the item that first reached sum s.
    std::vector<std::size_t> reach(total + 1, 0);
    std::vector<std::size_t> prev(total + 1, 0);
    std::vector<bool> ok(total + 1, false);
    ok[0] = true;
    for (std::size_t j = 0; j < items.size(); ++j) {
      const std::size_t w = groups[items[j]].per_label[c];
      for (std::size_t s = total; s >= w; --s) {
        if (!ok[s] && ok[s - w]) {
          ok[s] = true;
          reach[s] = j + 1;
          prev[s] = s - w;
        }
        if (s == w) break;
      }
    }
    // fold 0 gets s: final difference = base + 2s - total
    const long base = count[0][c] - count[1][c];
    long best = -1;
    std::vector<std::size_t> choices;
    for (std::size_t s = 0; s <= total; ++s) {
      if (!ok[s]) continue;
      const long d = std::labs(base + 2 * static_cast<long>(s) - static_cast<long>(total));
      if (best < 0 || d < best) {
        best = d;
        choices.assign(1, s);
      } else if (d == best) {
        choices.push_back(s);
      }
    }
    std::size_t s = choices[choices.size() == 1 ? 0 : rng() % choices.size()];
    std::vector<bool> in_zero(items.size(), false);
    while (s > 0) {
      in_zero[reach[s] - 1] = true;
      s = prev[s];
    }
    for (std::size_t j = 0; j < items.size(); ++j) place(items[j], in_zero[j] ? 0 : 1);
  }

  Partition p;
  p.folds.resize(2);
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (const auto& m : groups[i].members) p.folds[static_cast<std::size_t>(side[i])].push_back(m);
  for (auto& f : p.folds) std::sort(f.begin(), f.end());
  return p;
}

Partition manual_folds(const Corpus& corpus, const FoldAssignment& manual) {
  std::size_t n = 0;
  for (const auto& [id, f] : manual) {
    if (!corpus.contains(id)) throw UnknownExcerptError("fold file names unknown excerpt " + id);
    n = std::max(n, f + 1);
  }
  std::map<std::string, std::size_t> artist_fold;
  Partition p;
  p.folds.resize(n);
  for (const auto& e : corpus.excerpts()) {
    auto it = manual.find(e.id);
    if (it == manual.end()) throw Error("fold file does not assign excerpt " + e.id);
    const auto key = artist_key(e);
    if (!key.empty()) {
      auto [a, fresh] = artist_fold.emplace(key, it->second);
      if (!fresh && a->second != it->second)
        throw ArtistLeakError("artist '" + *e.artist + "' appears in folds " + std::to_string(a->second + 1) +
                              " and " + std::to_string(it->second + 1));
    }
    p.folds[it->second].push_back(e.id);
  }
  for (auto& f : p.folds) std::sort(f.begin(), f.end());
  return p;
}

Partition stratified(const Corpus& corpus, std::size_t k, std::uint64_t seed, std::size_t realization) {
  if (k < 2) throw Error("kfold needs at least 2 folds");
  auto rng = partition_rng(seed, realization);
  Partition p;
  p.folds.resize(k);
  std::size_t start = 0;
  for (const auto& label : corpus.labels()) {
    std::vector<std::string> ids;
    for (const auto& e : corpus.excerpts())
      if (e.label == label) ids.push_back(e.id);
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < ids.size(); ++i) p.folds[(start + i) % k].push_back(ids[i]);
    start = (start + ids.size()) % k;
  }
  for (auto& f : p.folds) std::sort(f.begin(), f.end());
  return p;
}

Partition holdout(const Corpus& corpus, double test_fraction, std::uint64_t seed, std::size_t realization) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("split test fraction must be in (0, 1)");
  auto ids = sorted_ids(corpus);
  auto rng = partition_rng(seed, realization);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
  Partition p;
  p.folds.emplace_back(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  p.folds.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  for (auto& f : p.folds) std::sort(f.begin(), f.end());
  p.tested = 1;
  return p;
}

}  // namespace

Partition make_partition(const Corpus& corpus, Scheme scheme, std::uint64_t seed, std::size_t realization,
                         const PartitionOptions& options) {
  Partition p;
  switch (scheme) {
    case Scheme::st:
    case Scheme::st_prime:
      p = halves(corpus, seed, realization);
      break;
    case Scheme::af:
    case Scheme::af_prime:
      p = options.manual ? manual_folds(corpus, *options.manual) : artist_filtered(corpus, seed, realization);
      break;
    case Scheme::kfold:
      p = stratified(corpus, options.k, seed, realization);
      break;
    case Scheme::split:
      p = holdout(corpus, options.test_fraction, seed, realization);
      break;
  }
  if (scheme == Scheme::st_prime || scheme == Scheme::af_prime) {
    if (!options.catalog) throw Error(to_string(scheme) + " needs a fault catalog");
    const auto ex = options.catalog->exclusions();
    const std::set<std::string> drop(ex.begin(), ex.end());
    for (auto& f : p.folds) std::erase_if(f, [&](const std::string& id) { return drop.count(id) > 0; });
  }
  p.scheme = scheme;
  p.seed = seed;
  p.realization = realization;
  if (p.tested == 0) p.tested = p.folds.size();
  return p;
}

namespace {

std::vector<std::vector<long>> fold_label_counts(const Corpus& corpus, const Partition& p) {
  std::vector<std::vector<long>> n(p.folds.size(), std::vector<long>(corpus.labels().size(), 0));
  for (std::size_t f = 0; f < p.folds.size(); ++f)
    for (const auto& id : p.folds[f]) ++n[f][corpus.label_index(corpus.at(id).label)];
  return n;
}

}  // namespace

std::size_t class_imbalance(const Corpus& corpus, const Partition& p) {
  if (p.folds.size() != 2) throw Error("class_imbalance: needs two folds");
  const auto n = fold_label_counts(corpus, p);
  std::size_t s = 0;
  for (std::size_t c = 0; c < n[0].size(); ++c) s += static_cast<std::size_t>(std::labs(n[0][c] - n[1][c]));
  return s;
}

std::size_t max_class_imbalance(const Corpus& corpus, const Partition& p) {
  if (p.folds.size() != 2) throw Error("class_imbalance: needs two folds");
  const auto n = fold_label_counts(corpus, p);
  std::size_t m = 0;
  for (std::size_t c = 0; c < n[0].size(); ++c) m = std::max(m, static_cast<std::size_t>(std::labs(n[0][c] - n[1][c])));
  return m;
}

FoldAssignment parse_fold_file(std::string_view text) {
  const auto rows = csv::parse(text);
  std::map<std::string, long long> raw;
  std::set<long long> values;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (r == 0 && f.size() == 2 && f[0] == "id" && f[1] == "fold") continue;
    if (f.size() != 2 || f[0].empty()) throw ParseError("fold file: expected id,fold", rows[r].line);
    long long v = 0;
    try {
      std::size_t used = 0;
      v = std::stoll(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("fold");
    } catch (const std::exception&) {
      throw ParseError("fold file: bad fold '" + f[1] + "'", rows[r].line);
    }
    if (!raw.emplace(f[0], v).second) throw DuplicateIdError("fold file lists " + f[0] + " twice");
    values.insert(v);
  }
  std::map<long long, std::size_t> renumber;
  for (long long v : values) renumber.emplace(v, renumber.size());
  FoldAssignment out;
  for (const auto& [id, v] : raw) out.emplace(id, renumber[v]);
  return out;
}

FoldAssignment load_fold_file(const std::filesystem::path& path) { return parse_fold_file(csv::read_file(path)); }

std::string format_partition_csv(const Partition& p) {
  std::vector<std::pair<std::string, std::size_t>> rows;
  for (std::size_t f = 0; f < p.folds.size(); ++f)
    for (const auto& id : p.folds[f]) rows.emplace_back(id, f + 1);
  std::sort(rows.begin(), rows.end());
  std::string out = "id,fold\n";
  for (const auto& [id, f] : rows) out += csv::quote(id) + "," + std::to_string(f) + "\n";
  return out;
}

// --- experiments -------------------------------------------------------------

std::vector<FoldResult> run_folds(const Corpus& corpus, const Partition& p, const FoldPredictor& predict,
                                  const RelabelMap* relabel) {
  std::vector<FoldResult> out;
  for (std::size_t f = 0; f < p.tested; ++f) {
    std::vector<std::string> train;
    for (std::size_t o = 0; o < p.folds.size(); ++o)
      if (o != f) train.insert(train.end(), p.folds[o].begin(), p.folds[o].end());
    std::sort(train.begin(), train.end());
    const auto& test = p.folds[f];
    const auto predicted = predict(train, test);
    if (predicted.size() != test.size()) throw Error("predictor returned the wrong number of labels");

    FoldResult r;
    r.fold = f;
    r.table = ConfusionTable(corpus.labels());
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::string truth = corpus.at(test[i]).label;
      if (relabel)
        if (auto it = relabel->find(test[i]); it != relabel->end()) truth = it->second;
      r.table.add(corpus.label_index(truth), corpus.label_index(predicted[i]));
      r.predictions.push_back({p.realization, f, test[i], truth, predicted[i]});
    }
    r.merit = figures_of_merit(r.table);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FoldResult> run_experiment(const Corpus& corpus, const Partition& p, ClassifierKind kind,
                                       const FeatureTable& features, const RelabelMap* relabel) {
  for (const auto& id : p.included()) {
    auto it = features.find(id);
    if (it == features.end() || it->second.empty()) throw IncompleteFeaturesError("no feature rows for excerpt " + id);
  }
  std::vector<std::vector<std::size_t>> degenerate;
  std::size_t fold_no = 0;
  auto predictor = [&](std::span<const std::string> train, std::span<const std::string> test) {
    const std::size_t fold = fold_no++;
    std::vector<FeatureVector> raw;
    std::vector<std::size_t> targets;
    for (const auto& id : train) {
      const std::size_t g = corpus.label_index(corpus.at(id).label);
      for (const auto& v : features.find(id)->second) {
        raw.push_back(v);
        targets.push_back(g);
      }
    }
    if (raw.empty()) throw Error("fold " + std::to_string(fold + 1) + " has no training excerpts");
    const auto map = fit_normalization(raw);
    degenerate.push_back(map.degenerate);
    TrainingSet set{corpus.labels(), apply_normalization(map, raw), std::move(targets)};
    const auto model = caudit::train(kind, set, derive_seed(p.seed, p.realization * 1024 + fold));

    std::vector<std::string> predicted(test.size());
    parallel_for(test.size(), [&](std::size_t i) {
      const auto vs = apply_normalization(map, features.find(test[i])->second);
      predicted[i] = corpus.labels()[classify_excerpt(model, vs, stream_id(test[i]))];
    });
    return predicted;
  };
  auto results = run_folds(corpus, p, predictor, relabel);
  for (std::size_t f = 0; f < results.size(); ++f) results[f].degenerate_dims = degenerate[f];
  return results;
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::vector<Prediction> ExperimentReport::predictions() const {
  std::vector<Prediction> out;
  for (const auto& run : runs)
    for (const auto& f : run) out.insert(out.end(), f.predictions.begin(), f.predictions.end());
  return out;
}

ConfusionTable ExperimentReport::pooled() const {
  ConfusionTable t(labels);
  for (const auto& run : runs)
    for (const auto& f : run)
      for (std::size_t r = 0; r < t.size(); ++r)
        for (std::size_t g = 0; g < t.size(); ++g) t.counts[r][g] += f.table.counts[r][g];
  return t;
}

ExperimentReport evaluate(const Corpus& corpus, const ExperimentConfig& config, const FeatureTable& features,
                          const RelabelMap* relabel) {
  if (config.realizations == 0) throw Error("need at least one realization");
  ExperimentReport rep;
  rep.scheme = config.scheme;
  rep.classifier = config.classifier;
  rep.seed = config.seed;
  rep.realizations = config.realizations;
  rep.relabeled = relabel != nullptr;
  rep.labels = corpus.labels();
  std::vector<double> acc;
  for (std::size_t r = 0; r < config.realizations; ++r) {
    const auto p = make_partition(corpus, config.scheme, config.seed, r, config.options);
    rep.runs.push_back(run_experiment(corpus, p, config.classifier, features, relabel));
    for (const auto& f : rep.runs.back()) acc.push_back(f.merit.normalized_accuracy);
  }
  std::tie(rep.mean_accuracy, rep.std_accuracy) = mean_std(acc);
  return rep;
}

namespace {

json optional_array(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
  return a;
}

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

}  // namespace

std::string report_to_json(const ExperimentReport& rep) {
  json runs = json::array();
  for (std::size_t r = 0; r < rep.runs.size(); ++r) {
    json folds = json::array();
    for (const auto& f : rep.runs[r]) {
      folds.push_back({{"fold", f.fold + 1},
                       {"test_counts", f.table.test_sizes()},
                       {"confusion", f.table.counts},
                       {"recall", optional_array(f.merit.recall)},
                       {"precision", optional_array(f.merit.precision)},
                       {"fscore", optional_array(f.merit.fscore)},
                       {"normalized_accuracy", f.merit.normalized_accuracy},
                       {"degenerate_dimensions", f.degenerate_dims}});
    }
    runs.push_back({{"realization", r}, {"folds", std::move(folds)}});
  }
  json preds = json::array();
  for (const auto& p : rep.predictions())
    preds.push_back({{"realization", p.realization},
                     {"fold", p.fold + 1},
                     {"id", p.id},
                     {"true_label", p.truth},
                     {"predicted_label", p.predicted}});
  json doc{{"scheme", to_string(rep.scheme)},
           {"classifier", to_string(rep.classifier)},
           {"seed", rep.seed},
           {"realizations", rep.realizations},
           {"relabeled", rep.relabeled},
           {"labels", rep.labels},
           {"runs", std::move(runs)},
           {"summary", {{"mean_normalized_accuracy", rep.mean_accuracy}, {"std_normalized_accuracy", rep.std_accuracy}}},
           {"predictions", std::move(preds)}};
  return doc.dump(2) + "\n";
}

std::string render_report(const ExperimentReport& rep) {
  std::string out = "scheme " + to_string(rep.scheme) + ", classifier " + to_string(rep.classifier) + ", seed " +
                    std::to_string(rep.seed) + ", realizations " + std::to_string(rep.realizations) +
                    (rep.relabeled ? ", relabeled" : "") + "\n";
  for (std::size_t r = 0; r < rep.runs.size(); ++r)
    for (const auto& f : rep.runs[r])
      out += "  realization " + std::to_string(r) + " fold " + std::to_string(f.fold + 1) + ": accuracy " +
             pct(f.merit.normalized_accuracy) + "\n";
  out += "normalized accuracy: " + pct(rep.mean_accuracy) + " +/- " + pct(rep.std_accuracy) + "\n\n";
  const auto pooled = rep.pooled();
  out += render_confusion_report(pooled, figures_of_merit(pooled));
  return out;
}

std::vector<Prediction> predictions_from_report_json(std::string_view text) {
  std::vector<Prediction> out;
  try {
    const auto doc = json::parse(text);
    for (const auto& p : doc.at("predictions")) {
      const std::size_t fold = p.at("fold").get<std::size_t>();
      out.push_back({p.value("realization", std::size_t{0}), fold > 0 ? fold - 1 : 0, p.at("id").get<std::string>(),
                     p.at("true_label").get<std::string>(), p.at("predicted_label").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return out;
}

std::string format_predictions_csv(std::span<const Prediction> predictions) {
  std::string out = "id,true_label,predicted_label,fold,realization\n";
  for (const auto& p : predictions)
    out += csv::join({p.id, p.truth, p.predicted, std::to_string(p.fold + 1), std::to_string(p.realization)}) + "\n";
  return out;
}

std::vector<Prediction> parse_predictions_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) return {};
  const auto& h = rows.front().fields;
  if (h.size() < 4 || h[0] != "id" || h[1] != "true_label" || h[2] != "predicted_label" || h[3] != "fold")
    throw ParseError("predictions: header must be id,true_label,predicted_label,fold", rows.front().line);
  std::vector<Prediction> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != h.size()) throw ParseError("predictions: wrong field count", rows[r].line);
    Prediction p;
    p.id = f[0];
    p.truth = f[1];
    p.predicted = f[2];
    try {
      const auto fold = std::stoul(f[3]);
      p.fold = fold > 0 ? fold - 1 : 0;
      if (f.size() > 4) p.realization = std::stoul(f[4]);
    } catch (const std::exception&) {
      throw ParseError("predictions: bad fold or realization", rows[r].line);
    }
    out.push_back(std::move(p));
  }
  return out;
}

// --- significance ------------------------------------------------------------

namespace {

// P[T <= a] for T ~ Binomial(n, 1/2).
double lower_tail(std::size_t n, std::size_t a) {
  if (n <= 62) {
    // Exact: integer binomial coefficients, one final power-of-two scaling.
    std::uint64_t c = 1, sum = 0;
    for (std::size_t i = 0; i <= a; ++i) {
      sum += c;
      c = c * (n - i) / (i + 1);
    }
    return std::ldexp(static_cast<double>(sum), -static_cast<int>(n));
  }
  const double ln2 = std::log(2.0);
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i <= a; ++i)
    sum += std::exp(lgn - std::lgamma(static_cast<double>(i) + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) -
                    static_cast<double>(n) * ln2);
  return sum;
}

}  // namespace

SignificanceResult significance_test(std::size_t n, std::size_t t12, double alpha) {
  if (t12 > n) throw Error("significance_test: t12 exceeds n");
  SignificanceResult r;
  r.n = n;
  r.t12 = t12;
  if (n == 0) return r;
  const std::size_t lo = std::min(t12, n - t12);
  // P[T >= n - lo] equals P[T <= lo] by symmetry.
  r.p = std::min(1.0, 2.0 * lower_tail(n, lo));
  r.reject = r.p < alpha;
  return r;
}

SignificanceResult significance_test(std::span<const Prediction> a, std::span<const Prediction> b, double alpha) {
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  std::map<Key, const Prediction*> index;
  for (const auto& p : a)
    if (!index.emplace(Key{p.realization, p.fold, p.id}, &p).second)
      throw Error("system 1 classified " + p.id + " twice in one fold");
  if (a.size() != b.size()) throw Error("systems classified different numbers of observations");
  std::size_t only1 = 0, only2 = 0, both = 0, neither = 0;
  std::set<Key> seen;
  for (const auto& q : b) {
    const Key key{q.realization, q.fold, q.id};
    auto it = index.find(key);
    if (it == index.end() || !seen.insert(key).second)
      throw Error("observation " + q.id + " is not shared by both systems");
    const Prediction& p = *it->second;
    if (p.truth != q.truth) throw Error("systems disagree on the true label of " + q.id);
    const bool c1 = p.predicted == p.truth, c2 = q.predicted == q.truth;
    if (c1 && c2)
      ++both;
    else if (c1)
      ++only1;
    else if (c2)
      ++only2;
    else
      ++neither;
  }
  auto r = significance_test(only1 + only2, only1, alpha);
  r.both = both;
  r.neither = neither;
  return r;
}

std::string significance_to_json(const SignificanceResult& r) {
  json doc{{"n", r.n},
           {"t12", r.t12},
           {"t21", r.n - r.t12},
           {"both_correct", r.both},
           {"neither_correct", r.neither},
           {"p", r.p},
           {"alpha", kSignificanceLevel},
           {"reject", r.reject},
           {"decision", r.reject ? "reject" : "fail to reject"}};
  return doc.dump(2) + "\n";
}

RelabelPlan relabel_plan(const Corpus& corpus, std::span<const MislabelVerdict> mislabelings) {
  RelabelPlan plan;
  for (const auto& v : mislabelings) {
    if (!v.flagged) continue;
    const Excerpt& e = corpus.at(v.id);
    if (!v.scores || v.scores->empty()) {
      plan.unscored.push_back(v.id);
      continue;
    }
    const std::pair<std::string, double>* best = nullptr;
    for (const auto& label : corpus.labels())
      for (const auto& s : *v.scores)
        if (s.first == label && (!best || s.second > best->second)) best = &s;
    if (!best || best->second <= 0.0) continue;
    if (best->first != e.label) plan.labels.emplace(v.id, best->first);
  }
  std::sort(plan.unscored.begin(), plan.unscored.end());
  return plan;
}

}  // namespace caudit
