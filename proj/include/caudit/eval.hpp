#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caudit/classify.hpp"
#include "caudit/corpus.hpp"
#include "caudit/faults.hpp"
#include "caudit/features.hpp"
#include "caudit/metrics.hpp"

namespace caudit {

// st_prime / af_prime drop the catalog's exclusions.
enum class Scheme { st, st_prime, af, af_prime, kfold, split };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct Partition {
  Scheme scheme = Scheme::st;
  std::vector<std::vector<std::string>> folds;  // each sorted
  std::uint64_t seed = 0;
  std::size_t realization = 0;
  // Folds 0..tested-1 are test folds (each trained on the rest). Only the
  // split scheme tests fewer than all of them.
  std::size_t tested = 0;

  std::vector<std::string> included() const;  // sorted
};

// Manual folds: excerpt id -> fold index (0-based).
using FoldAssignment = std::map<std::string, std::size_t, std::less<>>;

struct PartitionOptions {
  std::size_t k = 2;             // kfold
  double test_fraction = 0.5;    // split
  const FaultCatalog* catalog = nullptr;  // needed by st_prime / af_prime
  std::optional<FoldAssignment> manual;   // overrides the af heuristic
};

// Throws Error when a filtered scheme has no catalog, and ArtistLeakError
// when a manual assignment splits an identified artist.
Partition make_partition(const Corpus& corpus, Scheme scheme, std::uint64_t seed, std::size_t realization = 0,
                         const PartitionOptions& options = {});

// Artist key used for filtering; empty for excerpts without an artist.
std::string artist_key(const Excerpt& e);
// Sum over labels of |fold 0 count - fold 1 count|.
std::size_t class_imbalance(const Corpus& corpus, const Partition& p);
// Largest single-label |fold 0 - fold 1|.
std::size_t max_class_imbalance(const Corpus& corpus, const Partition& p);

// Fold CSV: id,fold. Fold values may be any integers; they are renumbered
// 0.. in ascending order.
FoldAssignment parse_fold_file(std::string_view text);
FoldAssignment load_fold_file(const std::filesystem::path& path);
std::string format_partition_csv(const Partition& p);

struct Prediction {
  std::size_t realization = 0;
  std::size_t fold = 0;
  std::string id;
  std::string truth;
  std::string predicted;
};

struct FoldResult {
  std::size_t fold = 0;
  ConfusionTable table;
  FiguresOfMerit merit;
  std::vector<Prediction> predictions;
  std::vector<std::size_t> degenerate_dims;  // from the training normalization
};

// Truth label overrides applied at scoring time.
using RelabelMap = std::map<std::string, std::string, std::less<>>;

// Predicts a label for each test id given the training ids.
using FoldPredictor =
    std::function<std::vector<std::string>(std::span<const std::string> train, std::span<const std::string> test)>;

std::vector<FoldResult> run_folds(const Corpus& corpus, const Partition& p, const FoldPredictor& predict,
                                  const RelabelMap* relabel = nullptr);

// Trains on the complement of each tested fold with normalization fitted on
// the training vectors. Throws IncompleteFeaturesError when an included
// excerpt has no feature rows.
std::vector<FoldResult> run_experiment(const Corpus& corpus, const Partition& p, ClassifierKind kind,
                                       const FeatureTable& features, const RelabelMap* relabel = nullptr);

struct ExperimentConfig {
  Scheme scheme = Scheme::st;
  ClassifierKind classifier = ClassifierKind::nn;
  std::uint64_t seed = 0;
  std::size_t realizations = 1;
  PartitionOptions options;
};

struct ExperimentReport {
  Scheme scheme = Scheme::st;
  ClassifierKind classifier = ClassifierKind::nn;
  std::uint64_t seed = 0;
  std::size_t realizations = 0;
  bool relabeled = false;
  std::vector<std::string> labels;
  std::vector<std::vector<FoldResult>> runs;  // [realization][tested fold]
  double mean_accuracy = 0.0;  // over every tested fold of every realization
  double std_accuracy = 0.0;   // sample standard deviation of the same

  std::vector<Prediction> predictions() const;
  ConfusionTable pooled() const;
};

ExperimentReport evaluate(const Corpus& corpus, const ExperimentConfig& config, const FeatureTable& features,
                          const RelabelMap* relabel = nullptr);

// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(std::span<const double> xs);

std::string report_to_json(const ExperimentReport& report);
std::string render_report(const ExperimentReport& report);
// Reads the predictions list from a report.
std::vector<Prediction> predictions_from_report_json(std::string_view text);
// Predictions CSV: id,true_label,predicted_label,fold (optional realization).
std::string format_predictions_csv(std::span<const Prediction> predictions);
std::vector<Prediction> parse_predictions_csv(std::string_view text);

struct SignificanceResult {
  std::size_t n = 0;    // observations where exactly one system is right
  std::size_t t12 = 0;  // of those, system 1 is right
  double p = 1.0;
  bool reject = false;
  std::size_t both = 0;
  std::size_t neither = 0;
};

inline constexpr double kSignificanceLevel = 0.05;

SignificanceResult significance_test(std::size_t n, std::size_t t12, double alpha = kSignificanceLevel);
// Pairs predictions by (realization, fold, id). Throws Error when the two
// systems did not classify the same observations or disagree on truth.
SignificanceResult significance_test(std::span<const Prediction> a, std::span<const Prediction> b,
                                     double alpha = kSignificanceLevel);
std::string significance_to_json(const SignificanceResult& r);

struct RelabelPlan {
  RelabelMap labels;                 // only entries whose label changes
  std::vector<std::string> unscored; // flagged but without a score vector
};

// Flagged mislabelings take the label with the highest score (first in
// label order on ties); all-zero score vectors keep the original label.
RelabelPlan relabel_plan(const Corpus& corpus, std::span<const MislabelVerdict> mislabelings);

}  // namespace caudit
