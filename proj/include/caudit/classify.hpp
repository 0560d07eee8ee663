#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "caudit/features.hpp"

namespace caudit {

enum class ClassifierKind { nn, md, mmd };

std::string to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(const std::string& s);

// Training vectors with label indices into `labels`.
struct TrainingSet {
  std::vector<std::string> labels;
  std::vector<FeatureVector> vectors;
  std::vector<std::size_t> targets;
};

struct TrainedModel {
  ClassifierKind kind = ClassifierKind::nn;
  std::vector<std::string> labels;
  std::size_t dims = 0;
  std::uint64_t seed = 0;

  // nn
  std::vector<FeatureVector> vectors;
  std::vector<std::size_t> targets;
  // md, mmd
  std::vector<FeatureVector> means;
  // mmd: row-major inverse of the regularized total covariance
  std::vector<double> precision;
  double ridge = 0.0;
};

// Throws EmptyClassError for md/mmd when a label has no vectors, and Error
// when the set is empty or ragged.
TrainedModel train(ClassifierKind kind, const TrainingSet& set, std::uint64_t seed);

// Sum over the vectors of each label's log posterior up to a shared
// constant (md/mmd only).
std::vector<double> class_scores(const TrainedModel& model, std::span<const FeatureVector> vectors);

// Index of the nearest training vector; ties go to the lower index.
std::size_t nearest_neighbor(const TrainedModel& model, const FeatureVector& v);

// `task` selects the random stream for nn's choice among modal labels so a
// prediction does not depend on evaluation order.
std::size_t classify_excerpt(const TrainedModel& model, std::span<const FeatureVector> vectors, std::uint64_t task = 0);

// splitmix64 mixing of a base seed with a stream id.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t stream_id(std::string_view name);

}  // namespace caudit
