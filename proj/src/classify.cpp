#include "caudit/classify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <random>

#include "caudit/errors.hpp"

namespace caudit {

std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::nn: return "nn";
    case ClassifierKind::md: return "md";
    case ClassifierKind::mmd: return "mmd";
  }
  return "nn";
}

ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "nn") return ClassifierKind::nn;
  if (s == "md") return ClassifierKind::md;
  if (s == "mmd") return ClassifierKind::mmd;
  throw Error("unknown classifier '" + s + "' (nn, md, mmd)");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(base ^ mix(stream));
}

std::uint64_t stream_id(std::string_view name) {
  // FNV-1a; std::hash is not stable across implementations.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double x = a[d] - b[d];
    s += x * x;
  }
  return s;
}

}  // namespace

TrainedModel train(ClassifierKind kind, const TrainingSet& set, std::uint64_t seed) {
  if (set.vectors.empty()) throw Error("train: no training vectors");
  if (set.vectors.size() != set.targets.size()) throw Error("train: vectors and targets differ in length");
  TrainedModel m;
  m.kind = kind;
  m.labels = set.labels;
  m.seed = seed;
  m.dims = set.vectors.front().size();
  for (std::size_t i = 0; i < set.vectors.size(); ++i) {
    if (set.vectors[i].size() != m.dims) throw Error("train: ragged feature vectors");
    if (set.targets[i] >= set.labels.size()) throw Error("train: target out of range");
  }

  if (kind == ClassifierKind::nn) {
    m.vectors = set.vectors;
    m.targets = set.targets;
    return m;
  }

  const std::size_t k = set.labels.size();
  std::vector<std::size_t> count(k, 0);
  m.means.assign(k, FeatureVector(m.dims, 0.0));
  for (std::size_t i = 0; i < set.vectors.size(); ++i) {
    ++count[set.targets[i]];
    for (std::size_t d = 0; d < m.dims; ++d) m.means[set.targets[i]][d] += set.vectors[i][d];
  }
  for (std::size_t g = 0; g < k; ++g) {
    if (count[g] == 0) throw EmptyClassError("no training vectors for label " + set.labels[g]);
    for (double& x : m.means[g]) x /= static_cast<double>(count[g]);
  }
  if (kind == ClassifierKind::md) return m;

  // Total covariance around the global mean.
  const auto n = static_cast<Eigen::Index>(set.vectors.size());
  const auto dims = static_cast<Eigen::Index>(m.dims);
  Eigen::MatrixXd x(n, dims);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < dims; ++d) x(i, d) = set.vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  Eigen::MatrixXd cov = n > 1 ? Eigen::MatrixXd(x.transpose() * x / static_cast<double>(n - 1))
                              : Eigen::MatrixXd::Zero(dims, dims);
  const double trace = cov.trace();
  m.ridge = trace > 0.0 ? 1e-6 * trace / static_cast<double>(dims) : 1e-6;
  cov.diagonal().array() += m.ridge;
  const Eigen::MatrixXd inv = cov.ldlt().solve(Eigen::MatrixXd::Identity(dims, dims));
  m.precision.resize(m.dims * m.dims);
  for (Eigen::Index r = 0; r < dims; ++r)
    for (Eigen::Index c = 0; c < dims; ++c) m.precision[static_cast<std::size_t>(r * dims + c)] = 0.5 * (inv(r, c) + inv(c, r));
  return m;
}

std::vector<double> class_scores(const TrainedModel& model, std::span<const FeatureVector> vectors) {
  if (model.kind == ClassifierKind::nn) throw Error("class_scores: not defined for nn");
  const std::size_t k = model.means.size();
  std::vector<double> score(k, 0.0);
  std::vector<double> diff(model.dims);
  for (const auto& v : vectors) {
    if (v.size() != model.dims) throw Error("classify: dimension mismatch");
    for (std::size_t g = 0; g < k; ++g) {
      if (model.kind == ClassifierKind::md) {
        score[g] -= squared_distance(v, model.means[g]);
        continue;
      }
      for (std::size_t d = 0; d < model.dims; ++d) diff[d] = v[d] - model.means[g][d];
      double q = 0.0;
      for (std::size_t r = 0; r < model.dims; ++r) {
        double row = 0.0;
        const double* p = model.precision.data() + r * model.dims;
        for (std::size_t c = 0; c < model.dims; ++c) row += p[c] * diff[c];
        q += diff[r] * row;
      }
      score[g] -= q;
    }
  }
  return score;
}

std::size_t nearest_neighbor(const TrainedModel& model, const FeatureVector& v) {
  if (v.size() != model.dims) throw Error("classify: dimension mismatch");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.vectors.size(); ++i) {
    const double d = squared_distance(v, model.vectors[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t classify_excerpt(const TrainedModel& model, std::span<const FeatureVector> vectors, std::uint64_t task) {
  if (vectors.empty()) throw Error("classify: excerpt has no feature vectors");
  if (model.kind != ClassifierKind::nn) {
    const auto s = class_scores(model, vectors);
    return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  }
  std::vector<std::size_t> votes(model.labels.size(), 0);
  for (const auto& v : vectors) ++votes[model.targets[nearest_neighbor(model, v)]];
  const std::size_t top = *std::max_element(votes.begin(), votes.end());
  std::vector<std::size_t> modal;
  for (std::size_t g = 0; g < votes.size(); ++g)
    if (votes[g] == top) modal.push_back(g);
  if (modal.size() == 1) return modal.front();
  std::mt19937_64 rng(derive_seed(model.seed, task));
  std::uniform_int_distribution<std::size_t> pick(0, modal.size() - 1);
  return modal[pick(rng)];
}

}  // namespace caudit
