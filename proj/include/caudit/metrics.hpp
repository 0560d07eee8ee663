#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace caudit {

// Class-by-class tally. counts[r][g] holds the (possibly fractional) weight
// of true label g predicted as r: rows are predictions, columns truth.
struct ConfusionTable {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> counts;

  ConfusionTable() = default;
  explicit ConfusionTable(std::vector<std::string> label_set);

  void add(std::size_t truth, std::size_t predicted, double weight = 1.0);
  std::size_t size() const { return labels.size(); }
  // N^(g): column sums.
  std::vector<double> test_sizes() const;
};

struct FiguresOfMerit {
  std::vector<std::vector<double>> confusion;  // C[r][g] = M[r][g] / N[g] (0 when N[g] = 0)
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> precision;  // absent when the row sum is 0
  std::vector<std::optional<double>> fscore;     // absent when precision or recall is
  double normalized_accuracy = 0.0;              // mean recall over classes present
};

FiguresOfMerit figures_of_merit(const ConfusionTable& table);

}  // namespace caudit
