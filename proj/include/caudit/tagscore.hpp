#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "caudit/corpus.hpp"

namespace caudit {

using WeightedTag = std::pair<std::string, double>;

// The minimal majority prefix of a tag set whose last member's count is
// strictly above every excluded count.
struct TopTags {
  std::vector<WeightedTag> pairs;  // descending count, ties by tag
  double coverage = 0.0;           // selected mass / total mass
};

// Throws EmptyTagsError for an empty set; counts must be positive.
TopTags top_tags(std::span<const WeightedTag> pairs);
TopTags top_tags(const TagCountSet& set);

// c_i / sum(c) over the whole set, in input order.
std::vector<WeightedTag> normalize_counts(const TagCountSet& set);

struct LabelProfile {
  std::string label;
  TopTags top;                 // normalized counts (fractions of pooled total)
  std::size_t excerpts = 0;    // tagged, identified excerpts pooled
  std::int64_t pooled_total = 0;
};

// Pools counts over the label's identified, tagged excerpts, normalizes and
// selects top tags. Throws EmptyTagsError when nothing is tagged.
LabelProfile label_profile(const Corpus& corpus, const TagSnapshot& tags, const std::string& label);
LabelProfile label_profile(const std::string& label, std::span<const TagCountSet> sets);

// Profiles for every label that has at least one tagged excerpt, in label order.
std::vector<LabelProfile> label_profiles(const Corpus& corpus, const TagSnapshot& tags);

// r-label score: sum over the profile's top tags of d_j * c(y_j), where c is
// the excerpt's normalized count for the same tag (0 if absent).
double label_score(std::span<const WeightedTag> excerpt, const LabelProfile& profile);

enum class DeltaRule {
  adjacent_gap,  // largest gap between sorted row neighbours / 10
  range,         // (row max - row min) / 10
};

// Throws DegenerateRowError when all entries are equal or the row has < 2 entries.
double delta_g(std::span<const double> row, DeltaRule rule = DeltaRule::adjacent_gap);

struct ScoreMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> scores;  // scores[g][r] = C(T_g, T_r)
  std::vector<double> deltas;

  std::size_t index(const std::string& label) const;
  double diagonal(std::size_t g) const { return scores[g][g]; }
};

ScoreMatrix score_matrix(std::span<const LabelProfile> profiles, DeltaRule rule = DeltaRule::adjacent_gap);

enum class MislabelRule { none, low_own, high_other };
std::string to_string(MislabelRule rule);
MislabelRule parse_mislabel_rule(const std::string& s);

struct MislabelVerdict {
  std::string id;
  std::string label;
  double own_score = 0.0;
  double diagonal = 0.0;
  double delta = 0.0;
  std::string best_other_label;
  double best_other_score = 0.0;
  bool flagged = false;
  MislabelRule rule = MislabelRule::none;
  // Score against every profiled label, in ScoreMatrix label order.
  std::optional<std::vector<std::pair<std::string, double>>> scores;
};

// Applies the low-own and high-other tests to one excerpt's score vector.
MislabelVerdict judge(const std::string& id, const std::string& label, const ScoreMatrix& matrix,
                      const std::vector<double>& scores);

// One verdict per identified, tagged excerpt whose label has a profile.
std::vector<MislabelVerdict> detect_mislabelings(const Corpus& corpus, const TagSnapshot& tags,
                                                 std::span<const LabelProfile> profiles,
                                                 const ScoreMatrix& matrix);

std::string format_verdicts_csv(std::span<const MislabelVerdict> verdicts);

}  // namespace caudit
