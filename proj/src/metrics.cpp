#include "caudit/metrics.hpp"

#include "caudit/errors.hpp"

namespace caudit {

ConfusionTable::ConfusionTable(std::vector<std::string> label_set)
    : labels(std::move(label_set)), counts(labels.size(), std::vector<double>(labels.size(), 0.0)) {}

void ConfusionTable::add(std::size_t truth, std::size_t predicted, double weight) {
  if (truth >= size() || predicted >= size()) throw Error("confusion table: label index out of range");
  counts[predicted][truth] += weight;
}

std::vector<double> ConfusionTable::test_sizes() const {
  std::vector<double> n(size(), 0.0);
  for (std::size_t r = 0; r < size(); ++r)
    for (std::size_t g = 0; g < size(); ++g) n[g] += counts[r][g];
  return n;
}

FiguresOfMerit figures_of_merit(const ConfusionTable& table) {
  const std::size_t k = table.size();
  const auto n = table.test_sizes();
  FiguresOfMerit f;
  f.confusion.assign(k, std::vector<double>(k, 0.0));
  f.recall.resize(k);
  f.precision.resize(k);
  f.fscore.resize(k);

  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t g = 0; g < k; ++g) {
    if (n[g] > 0.0) {
      for (std::size_t r = 0; r < k; ++r) f.confusion[r][g] = table.counts[r][g] / n[g];
      f.recall[g] = f.confusion[g][g];
      recall_sum += *f.recall[g];
      ++present;
    }
    double row = 0.0;
    for (std::size_t c = 0; c < k; ++c) row += table.counts[g][c];
    if (row > 0.0) f.precision[g] = table.counts[g][g] / row;
    if (f.precision[g] && f.recall[g]) {
      const double p = *f.precision[g], r = *f.recall[g];
      f.fscore[g] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
  }
  f.normalized_accuracy = present ? recall_sum / static_cast<double>(present) : 0.0;
  return f;
}

}  // namespace caudit
