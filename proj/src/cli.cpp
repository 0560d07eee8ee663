#include "caudit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "caudit/classify.hpp"
#include "caudit/corpus.hpp"
#include "caudit/csv.hpp"
#include "caudit/errors.hpp"
#include "caudit/eval.hpp"
#include "caudit/faults.hpp"
#include "caudit/features.hpp"
#include "caudit/fingerprint.hpp"
#include "caudit/tagscore.hpp"

namespace caudit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string metadata, audio, tags, catalog, out, format;
  std::string cache, exact, recording, verdicts, distortions, folds, features, confusion;
  std::string scheme = "st", classifier = "nn", delta_rule = "gap";
  std::vector<std::string> inputs;
  double threshold = kDefaultDuplicateThreshold;
  double test_fraction = 0.5;
  std::uint64_t seed = kDefaultSeed;
  std::size_t realization = 0;
  std::size_t realizations = 0;  // 0 = scheme default
  std::size_t k = 2;
  bool strict = false;
  bool all = false;
};

void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty() || o.out == "-")
    out << text;
  else
    csv::write_file(o.out, text);
}

Corpus corpus_from(const Options& o) {
  if (o.metadata.empty()) throw Error("--metadata is required");
  Corpus c = load_metadata(o.metadata);
  if (!o.audio.empty()) c.attach_audio_dir(o.audio);
  return c;
}

std::string fixed(double x, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// --- audit dupes ---------------------------------------------------------------

int audit_dupes(const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = corpus_from(o);
  std::vector<HashSet> sets;
  if (!o.cache.empty() && fs::exists(o.cache)) {
    sets = read_fingerprint_cache(o.cache);
    std::set<std::string> have;
    for (const auto& s : sets) have.insert(s.owner);
    for (const auto& e : corpus.excerpts())
      if (!have.count(e.id)) throw FormatError("fingerprint cache has no entry for " + e.id);
    std::erase_if(sets, [&](const HashSet& s) { return !corpus.contains(s.owner); });
  } else {
    if (o.audio.empty()) throw Error("--audio is required without a fingerprint cache");
    sets = fingerprint_corpus(corpus);
    if (!o.cache.empty()) write_fingerprint_cache(o.cache, sets);
  }
  const auto scan = scan_repetitions(sets, o.threshold);

  if (o.format == "json") {
    json matches = json::array();
    for (const auto& m : scan.matches)
      matches.push_back({{"id_a", m.id_a}, {"id_b", m.id_b}, {"score", m.score}, {"offset_frames", m.offset_frames}});
    json doc{{"threshold", o.threshold},
             {"pairs_compared", scan.pairs_compared},
             {"group_count", scan.groups.size()},
             {"member_count", scan.member_count()},
             {"groups", scan.groups},
             {"matches", matches}};
    emit(o, out, doc.dump(2) + "\n");
  } else if (o.format == "text") {
    std::string text = "threshold " + fixed(o.threshold, 3) + ", " + std::to_string(scan.pairs_compared) +
                       " pairs compared\n" + std::to_string(scan.groups.size()) + " groups, " +
                       std::to_string(scan.member_count()) + " excerpts\n";
    for (const auto& g : scan.groups) {
      text += " ";
      for (const auto& id : g) text += " " + id;
      text += "\n";
    }
    emit(o, out, text);
  } else {
    emit(o, out, format_matches_csv(scan.matches));
  }
  if (!scan.groups.empty()) err << scan.groups.size() << " repetition groups (" << scan.member_count() << " excerpts)\n";
  return o.strict && !scan.groups.empty() ? kExitFindings : kExitOk;
}

// --- audit labels --------------------------------------------------------------

int audit_labels(const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = corpus_from(o);
  if (o.tags.empty()) throw Error("--tags is required");
  const TagSnapshot tags = load_tags(o.tags, corpus);
  const auto profiles = label_profiles(corpus, tags);
  if (profiles.size() < 2) throw EmptyTagsError("need tagged excerpts in at least two labels");
  const DeltaRule rule = o.delta_rule == "range" ? DeltaRule::range : DeltaRule::adjacent_gap;
  const auto matrix = score_matrix(profiles, rule);
  auto verdicts = detect_mislabelings(corpus, tags, profiles, matrix);
  std::size_t flagged = 0;
  for (const auto& v : verdicts) flagged += v.flagged;
  if (!o.all) std::erase_if(verdicts, [](const MislabelVerdict& v) { return !v.flagged; });

  if (o.format == "json") {
    json prof = json::array();
    for (const auto& p : profiles) {
      json top = json::array();
      for (const auto& [tag, w] : p.top.pairs) top.push_back({{"tag", tag}, {"weight", w}});
      prof.push_back({{"label", p.label}, {"excerpts", p.excerpts}, {"coverage", p.top.coverage}, {"top_tags", top}});
    }
    json cov = json::array();
    for (const auto& c : tag_coverage(corpus, tags))
      cov.push_back({{"label", c.label}, {"song", c.song}, {"artist", c.artist}});
    json doc{{"labels", matrix.labels},
             {"delta_rule", o.delta_rule},
             {"score_matrix", matrix.scores},
             {"deltas", matrix.deltas},
             {"profiles", prof},
             {"coverage", cov},
             {"flagged", flagged},
             {"verdicts", json::parse(verdicts_to_json(verdicts))}};
    emit(o, out, doc.dump(2) + "\n");
  } else if (o.format == "text") {
    std::string text = "paired label scores\n";
    std::size_t w = 10;
    for (const auto& l : matrix.labels) w = std::max(w, l.size() + 1);
    auto pad = [&](std::string s) { return s + std::string(w > s.size() ? w - s.size() : 1, ' '); };
    text += pad("");
    for (const auto& l : matrix.labels) text += pad(l);
    text += "delta\n";
    for (std::size_t g = 0; g < matrix.labels.size(); ++g) {
      text += pad(matrix.labels[g]);
      for (double s : matrix.scores[g]) text += pad(fixed(s, 4));
      text += fixed(matrix.deltas[g], 4) + "\n";
    }
    text += "\n" + std::to_string(flagged) + " flagged\n";
    for (const auto& v : verdicts)
      text += "  " + v.id + " (" + v.label + ") " + to_string(v.rule) + ": own " + fixed(v.own_score, 5) + ", " +
              v.best_other_label + " " + fixed(v.best_other_score, 5) + "\n";
    emit(o, out, text);
  } else {
    emit(o, out, format_verdicts_csv(verdicts));
  }
  if (flagged) err << flagged << " excerpts flagged as mislabeled\n";
  return o.strict && flagged ? kExitFindings : kExitOk;
}

// --- catalog -------------------------------------------------------------------

// Accepts the matches CSV of `audit dupes` (id_a,id_b,...) or group,id rows.
std::vector<std::vector<std::string>> read_exact_groups(const std::string& path) {
  const std::string text = csv::read_file(path);
  const auto rows = csv::parse(text);
  if (!rows.empty() && rows.front().fields.size() >= 2 && rows.front().fields[0] == "id_a") {
    std::vector<std::vector<std::string>> pairs;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].fields.size() < 2) throw ParseError("matches: expected id_a,id_b", rows[r].line);
      pairs.push_back({rows[r].fields[0], rows[r].fields[1]});
    }
    return pairs;
  }
  return parse_groups(text);
}

int catalog_build(const Options& o, std::ostream& out, std::ostream&) {
  const Corpus corpus = corpus_from(o);
  CatalogInputs in;
  if (!o.exact.empty()) in.exact_groups = read_exact_groups(o.exact);
  if (!o.recording.empty()) in.recording_groups = load_groups(o.recording);
  if (!o.distortions.empty()) in.distortions = load_distortions(o.distortions);
  if (!o.verdicts.empty()) {
    in.verdicts = verdicts_from_json(csv::read_file(o.verdicts));
  } else if (!o.tags.empty()) {
    const auto tags = load_tags(o.tags, corpus);
    const auto profiles = label_profiles(corpus, tags);
    const auto matrix = score_matrix(profiles);
    in.verdicts = detect_mislabelings(corpus, tags, profiles, matrix);
  }
  const auto cat = build_catalog(corpus, in);
  emit(o, out, o.format == "text" ? render_catalog(cat, &corpus) : catalog_to_json(cat));
  return kExitOk;
}

int catalog_show(const Options& o, std::ostream& out, std::ostream&) {
  if (o.catalog.empty()) throw Error("--catalog is required");
  const auto cat = load_catalog(o.catalog);
  if (o.format == "json") {
    emit(o, out, catalog_to_json(cat));
    return kExitOk;
  }
  std::string text;
  if (!o.metadata.empty()) {
    const Corpus corpus = corpus_from(o);
    text = render_catalog(cat, &corpus);
    const auto [lo, hi] = artist_bounds(corpus);
    text += "artists: between " + std::to_string(lo) + " and " + std::to_string(hi) + "\n";
  } else {
    text = render_catalog(cat);
  }
  emit(o, out, text);
  return kExitOk;
}

// --- partitions and experiments -----------------------------------------------

PartitionOptions partition_options(const Options& o, const FaultCatalog* cat) {
  PartitionOptions p;
  p.k = o.k;
  p.test_fraction = o.test_fraction;
  p.catalog = cat;
  if (!o.folds.empty()) p.manual = load_fold_file(o.folds);
  return p;
}

std::optional<FaultCatalog> maybe_catalog(const Options& o) {
  if (o.catalog.empty()) return std::nullopt;
  return load_catalog(o.catalog);
}

int partition_make(const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = corpus_from(o);
  const auto cat = maybe_catalog(o);
  const auto p = make_partition(corpus, parse_scheme(o.scheme), o.seed, o.realization,
                                partition_options(o, cat ? &*cat : nullptr));
  if (o.format == "json") {
    json doc{{"scheme", to_string(p.scheme)}, {"seed", p.seed}, {"realization", p.realization}, {"folds", p.folds}};
    emit(o, out, doc.dump(2) + "\n");
  } else if (o.format == "text") {
    std::string text = "scheme " + to_string(p.scheme) + ", seed " + std::to_string(p.seed) + ", realization " +
                       std::to_string(p.realization) + "\n";
    for (std::size_t f = 0; f < p.folds.size(); ++f) {
      std::vector<std::size_t> n(corpus.labels().size(), 0);
      for (const auto& id : p.folds[f]) ++n[corpus.label_index(corpus.at(id).label)];
      text += "fold " + std::to_string(f + 1) + ": " + std::to_string(p.folds[f].size()) + " excerpts (";
      for (std::size_t c = 0; c < n.size(); ++c) text += (c ? ", " : "") + corpus.labels()[c] + " " + std::to_string(n[c]);
      text += ")\n";
    }
    emit(o, out, text);
  } else {
    err << "scheme " << to_string(p.scheme) << ", seed " << p.seed << ", realization " << p.realization << "\n";
    emit(o, out, format_partition_csv(p));
  }
  return kExitOk;
}

int features_extract(const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = corpus_from(o);
  if (o.audio.empty()) throw Error("--audio is required");
  const auto table = extract_corpus_features(corpus);
  emit(o, out, format_features_csv(table));
  err << table.size() << " excerpts\n";
  return kExitOk;
}

int eval_run(const Options& o, std::ostream& out, std::ostream& err, bool relabel) {
  const Corpus corpus = corpus_from(o);
  if (o.features.empty()) throw Error("--features is required");
  const auto features = load_features(o.features);
  const auto cat = maybe_catalog(o);
  ExperimentConfig cfg;
  cfg.scheme = parse_scheme(o.scheme);
  cfg.classifier = parse_classifier_kind(o.classifier);
  cfg.seed = o.seed;
  cfg.realizations = o.realizations ? o.realizations
                     : (cfg.scheme == Scheme::st || cfg.scheme == Scheme::st_prime) ? 10
                                                                                     : 1;
  cfg.options = partition_options(o, cat ? &*cat : nullptr);

  std::optional<RelabelPlan> plan;
  if (relabel) {
    if (!cat) throw Error("eval relabel needs --catalog");
    plan = relabel_plan(corpus, cat->mislabelings);
    err << plan->labels.size() << " excerpts relabeled";
    if (!plan->unscored.empty()) err << ", " << plan->unscored.size() << " flagged without scores kept as is";
    err << "\n";
  }
  const auto rep = evaluate(corpus, cfg, features, plan ? &plan->labels : nullptr);
  for (const auto& run : rep.runs)
    for (const auto& f : run)
      if (!f.degenerate_dims.empty())
        err << "warning: fold " << f.fold + 1 << " has " << f.degenerate_dims.size()
            << " constant feature dimensions (mapped to 0)\n";
  if (o.format == "text")
    emit(o, out, render_report(rep));
  else if (o.format == "csv") {
    err << "seed " << rep.seed << "\n";
    const auto preds = rep.predictions();
    emit(o, out, format_predictions_csv(preds));
  } else
    emit(o, out, report_to_json(rep));
  return kExitOk;
}

std::vector<Prediction> read_predictions(const std::string& path) {
  const std::string text = csv::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return predictions_from_report_json(text);
  return parse_predictions_csv(text);
}

int eval_compare(const Options& o, std::ostream& out, std::ostream&) {
  if (o.inputs.size() != 2) throw Error("eval compare takes two prediction files");
  const auto a = read_predictions(o.inputs[0]);
  const auto b = read_predictions(o.inputs[1]);
  const auto r = significance_test(a, b);
  if (o.format == "text") {
    emit(o, out,
         "n " + std::to_string(r.n) + ", t12 " + std::to_string(r.t12) + ", t21 " + std::to_string(r.n - r.t12) +
             ", both correct " + std::to_string(r.both) + ", neither " + std::to_string(r.neither) + "\np " +
             fixed(r.p, 9) + ": " + (r.reject ? "reject" : "fail to reject") + " at alpha 0.05\n");
  } else {
    emit(o, out, significance_to_json(r));
  }
  return kExitOk;
}

int report_perfect(const Options& o, std::ostream& out, std::ostream&) {
  ConfusionTable table;
  std::string header;
  if (!o.confusion.empty()) {
    table = parse_confusion_csv(csv::read_file(o.confusion));
    header = "confusion " + fs::path(o.confusion).filename().string() + "\n";
  } else {
    if (o.catalog.empty()) throw Error("report perfect needs --catalog (with --metadata) or --confusion");
    const Corpus corpus = corpus_from(o);
    const auto cat = load_catalog(o.catalog);
    table = perfect_confusion(corpus, cat.mislabelings).table;
    header = std::to_string(cat.mislabelings.size()) + " mislabelings, " + std::to_string(corpus.size()) + " excerpts\n";
  }
  const auto fom = perfect_statistics(PerfectConfusion{table});
  if (o.format == "json") {
    auto opt = [](const std::vector<std::optional<double>>& v) {
      json a = json::array();
      for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
      return a;
    };
    json doc{{"labels", table.labels},        {"counts", table.counts},
             {"test_counts", table.test_sizes()}, {"recall", opt(fom.recall)},
             {"precision", opt(fom.precision)}, {"fscore", opt(fom.fscore)},
             {"normalized_accuracy", fom.normalized_accuracy}};
    emit(o, out, doc.dump(2) + "\n");
  } else if (o.format == "csv") {
    std::string text;
    for (const auto& l : table.labels) text += "," + csv::quote(l);
    text += "\n";
    for (std::size_t r = 0; r < table.size(); ++r) {
      text += csv::quote(table.labels[r]);
      for (double x : table.counts[r]) text += "," + fixed(x, 6);
      text += "\n";
    }
    emit(o, out, text);
  } else {
    emit(o, out, header + render_confusion_report(table, fom));
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Corpus fault audit and evaluation harness", "caudit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  Options o;

  auto formats = [&](CLI::App* c, const std::string& def, std::vector<std::string> allowed) {
    o.format = def;
    c->add_option("--format", o.format, "Output format")->check(CLI::IsMember(allowed))->capture_default_str();
    c->add_option("--out,-o", o.out, "Output file (default standard output)");
  };

  auto* audit = app.add_subcommand("audit", "Find repetitions and mislabelings");
  audit->require_subcommand(1);
  auto* dupes = audit->add_subcommand("dupes", "Fingerprint every excerpt and report exact repetitions");
  dupes->add_option("--metadata", o.metadata, "Metadata CSV (id,label,artist,title)")->required();
  dupes->add_option("--audio", o.audio, "Audio directory");
  dupes->add_option("--cache", o.cache, "Fingerprint cache (read if present, written otherwise)");
  dupes->add_option("--threshold", o.threshold, "Match score threshold")->capture_default_str();
  dupes->add_flag("--strict", o.strict, "Exit 1 when repetitions are found");

  auto* labels = audit->add_subcommand("labels", "Score excerpts against label tag profiles");
  labels->add_option("--metadata", o.metadata, "Metadata CSV")->required();
  labels->add_option("--tags", o.tags, "Tag snapshot JSON")->required();
  labels->add_option("--delta-rule", o.delta_rule, "Margin rule")
      ->check(CLI::IsMember({"gap", "range"}))
      ->capture_default_str();
  labels->add_flag("--all", o.all, "List every verdict, not just flagged ones");
  labels->add_flag("--strict", o.strict, "Exit 1 when mislabelings are found");

  auto* catalog = app.add_subcommand("catalog", "Assemble or display a fault catalog");
  catalog->require_subcommand(1);
  auto* build = catalog->add_subcommand("build", "Build a catalog JSON");
  build->add_option("--metadata", o.metadata, "Metadata CSV")->required();
  build->add_option("--exact", o.exact, "Exact repetitions: audit dupes CSV or group,id CSV");
  build->add_option("--recording", o.recording, "Recording repetitions: group,id CSV");
  build->add_option("--verdicts", o.verdicts, "Verdict JSON from audit labels --format json");
  build->add_option("--tags", o.tags, "Tag snapshot JSON (verdicts computed here)");
  build->add_option("--distortions", o.distortions, "Distortions CSV: id,note,usable_prefix_seconds");

  auto* show = catalog->add_subcommand("show", "Render a catalog per label");
  show->add_option("--catalog", o.catalog, "Catalog JSON")->required();
  show->add_option("--metadata", o.metadata, "Metadata CSV");

  auto* partition = app.add_subcommand("partition", "Cross-validation partitions");
  partition->require_subcommand(1);
  auto* make = partition->add_subcommand("make", "Write a partition");
  make->add_option("--metadata", o.metadata, "Metadata CSV")->required();
  make->add_option("--catalog", o.catalog, "Catalog JSON (st-prime, af-prime)");
  make->add_option("--folds", o.folds, "Manual fold file id,fold (af, af-prime)");
  make->add_option("--realization", o.realization, "Realization index")->capture_default_str();

  auto* features = app.add_subcommand("features", "Feature extraction");
  features->require_subcommand(1);
  auto* extract = features->add_subcommand("extract", "Texture-window features for every excerpt");
  extract->add_option("--metadata", o.metadata, "Metadata CSV")->required();
  extract->add_option("--audio", o.audio, "Audio directory")->required();
  extract->add_option("--out,-o", o.out, "Feature CSV (default standard output)");

  auto* eval = app.add_subcommand("eval", "Classification experiments");
  eval->require_subcommand(1);
  auto* run = eval->add_subcommand("run", "Run an experiment and report figures of merit");
  auto* relabel = eval->add_subcommand("relabel", "Same as run, scoring against catalog relabelings");
  for (auto* c : {run, relabel}) {
    c->add_option("--metadata", o.metadata, "Metadata CSV")->required();
    c->add_option("--features", o.features, "Feature CSV from features extract")->required();
    c->add_option("--catalog", o.catalog, "Catalog JSON")->required(c == relabel);
    c->add_option("--folds", o.folds, "Manual fold file id,fold");
    c->add_option("--classifier", o.classifier, "nn, md or mmd")
        ->check(CLI::IsMember({"nn", "md", "mmd"}))
        ->capture_default_str();
    c->add_option("--realizations", o.realizations, "Realizations (default 10 for st schemes, else 1)");
  }
  auto* compare = eval->add_subcommand("compare", "Paired binomial test between two systems");
  compare->add_option("inputs", o.inputs, "Two reports or predictions CSVs")->required()->expected(2);

  auto* report = app.add_subcommand("report", "Reports");
  report->require_subcommand(1);
  auto* perfect = report->add_subcommand("perfect", "Figures of merit of the mislabel-only classifier");
  perfect->add_option("--catalog", o.catalog, "Catalog JSON");
  perfect->add_option("--metadata", o.metadata, "Metadata CSV");
  perfect->add_option("--confusion", o.confusion, "Confusion CSV (skips the catalog)");

  for (auto* c : {make, run, relabel}) {
    c->add_option("--scheme", o.scheme, "st, st-prime, af, af-prime, kfold, split")
        ->check(CLI::IsMember({"st", "st-prime", "af", "af-prime", "kfold", "split"}))
        ->capture_default_str();
    c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    c->add_option("--k", o.k, "Folds for kfold")->capture_default_str();
    c->add_option("--test-fraction", o.test_fraction, "Test share for split")->capture_default_str();
  }
  formats(dupes, "csv", {"csv", "json", "text"});
  formats(labels, "csv", {"csv", "json", "text"});
  formats(build, "json", {"json", "text"});
  formats(show, "text", {"json", "text"});
  formats(make, "csv", {"csv", "json", "text"});
  formats(run, "json", {"csv", "json", "text"});
  formats(relabel, "json", {"csv", "json", "text"});
  formats(compare, "json", {"json", "text"});
  formats(perfect, "text", {"csv", "json", "text"});

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitError;
  }

  try {
    if (*dupes) return audit_dupes(o, out, err);
    if (*labels) return audit_labels(o, out, err);
    if (*build) return catalog_build(o, out, err);
    if (*show) return catalog_show(o, out, err);
    if (*make) return partition_make(o, out, err);
    if (*extract) return features_extract(o, out, err);
    if (*run) return eval_run(o, out, err, false);
    if (*relabel) return eval_run(o, out, err, true);
    if (*compare) return eval_compare(o, out, err);
    if (*perfect) return report_perfect(o, out, err);
  } catch (const std::exception& e) {
    err << "caudit: " << e.what() << "\n";
    return kExitError;
  }
  err << app.help();
  return kExitError;
}

}  // namespace caudit
