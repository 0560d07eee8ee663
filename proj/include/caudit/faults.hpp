#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "caudit/corpus.hpp"
#include "caudit/metrics.hpp"
#include "caudit/tagscore.hpp"

namespace caudit {

enum class RepetitionKind { exact, recording, artist, version };
enum class Evidence { fingerprint, metadata, manual };

std::string to_string(RepetitionKind k);
std::string to_string(Evidence e);
RepetitionKind parse_repetition_kind(const std::string& s);
Evidence parse_evidence(const std::string& s);

struct RepetitionGroup {
  RepetitionKind kind = RepetitionKind::exact;
  std::vector<std::string> members;  // sorted, at least two
  Evidence evidence = Evidence::fingerprint;

  friend bool operator==(const RepetitionGroup&, const RepetitionGroup&) = default;
};

struct Distortion {
  std::string id;
  std::string note;
  // Seconds from the start that remain usable; absent = whole excerpt usable.
  // Any value marks the excerpt unusable for filtered partitions.
  std::optional<double> usable_prefix_seconds;

  friend bool operator==(const Distortion&, const Distortion&) = default;
};

struct FaultCatalog {
  std::vector<RepetitionGroup> repetitions;
  std::vector<MislabelVerdict> mislabelings;
  std::vector<Distortion> distortions;

  // Exact and recording groups are merged where they overlap; every member
  // but the lexicographically smallest id is excluded, as is every
  // distortion that carries a usable prefix.
  std::vector<std::string> exclusions() const;
  std::vector<const RepetitionGroup*> groups_of(RepetitionKind kind) const;
};

struct CatalogInputs {
  std::vector<std::vector<std::string>> exact_groups;      // from fingerprinting
  std::vector<std::vector<std::string>> recording_groups;  // manual evidence
  std::vector<MislabelVerdict> verdicts;                   // only flagged ones are kept
  std::vector<Distortion> distortions;
};

// Throws UnknownExcerptError when any referenced id is not in the corpus.
FaultCatalog build_catalog(const Corpus& corpus, const CatalogInputs& inputs);

// Distortion CSV: id,note,usable_prefix_seconds (last field may be empty).
std::vector<Distortion> load_distortions(const std::filesystem::path& path);
std::vector<Distortion> parse_distortions(std::string_view text);
// Recording-evidence CSV: group,id (one row per member).
std::vector<std::vector<std::string>> load_groups(const std::filesystem::path& path);
std::vector<std::vector<std::string>> parse_groups(std::string_view text);

// Verdict list as written by `audit labels --format json` (array, or an
// object with a "verdicts" array).
std::string verdicts_to_json(std::span<const MislabelVerdict> verdicts);
std::vector<MislabelVerdict> verdicts_from_json(std::string_view text);

std::string catalog_to_json(const FaultCatalog& catalog);
FaultCatalog catalog_from_json(std::string_view text);
FaultCatalog load_catalog(const std::filesystem::path& path);
// Per-label text listing in the layout of the usual fault table.
std::string render_catalog(const FaultCatalog& catalog, const Corpus* corpus = nullptr);

// (distinct identified artists, that + excerpts without an artist).
std::pair<std::size_t, std::size_t> artist_bounds(const Corpus& corpus);

struct PerfectConfusion {
  ConfusionTable table;  // column sums equal per-label excerpt counts
};

// Upper-bound confusion where the only errors are flagged mislabelings.
// Throws IncompleteVerdictError for a flagged verdict without scores.
PerfectConfusion perfect_confusion(const Corpus& corpus, std::span<const MislabelVerdict> verdicts);

// Throws DegenerateClassError when a label has no excerpts.
FiguresOfMerit perfect_statistics(const PerfectConfusion& pc);

// Table text with fractional weights, precision column, F-score row and
// accuracy, all x10^-2 with one decimal.
std::string render_confusion_report(const ConfusionTable& table, const FiguresOfMerit& fom);

// Confusion CSV: header ",<labels...>", then one row per predicted label.
ConfusionTable parse_confusion_csv(std::string_view text);

}  // namespace caudit
