#include "caudit/tagscore.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "caudit/csv.hpp"
#include "caudit/errors.hpp"

namespace caudit {

namespace {

template <typename Count>
std::vector<std::pair<std::string, Count>> sorted_desc(std::span<const std::pair<std::string, Count>> pairs) {
  std::vector<std::pair<std::string, Count>> v(pairs.begin(), pairs.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return v;
}

// Length of the shortest prefix (of a descending list) with a strict drop
// after it and more than half the mass.
template <typename Count>
std::size_t majority_prefix(const std::vector<std::pair<std::string, Count>>& v, Count total) {
  Count running{};
  for (std::size_t k = 0; k < v.size(); ++k) {
    running += v[k].second;
    const bool strict_gap = k + 1 == v.size() || v[k].second > v[k + 1].second;
    if (strict_gap && running * 2 > total) return k + 1;
  }
  return v.size();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

TopTags top_tags(std::span<const WeightedTag> pairs) {
  if (pairs.empty()) throw EmptyTagsError("top_tags: empty tag set");
  double total = 0.0;
  for (const auto& [tag, c] : pairs) {
    if (!(c > 0.0)) throw EmptyTagsError("top_tags: non-positive count for '" + tag + "'");
    total += c;
  }
  auto v = sorted_desc<double>(pairs);
  const std::size_t k = majority_prefix<double>(v, total);
  TopTags out;
  double covered = 0.0;
  for (std::size_t i = 0; i < k; ++i) covered += v[i].second;
  v.resize(k);
  out.pairs = std::move(v);
  out.coverage = covered / total;
  return out;
}

TopTags top_tags(const TagCountSet& set) {
  std::vector<WeightedTag> w;
  for (const auto& [tag, c] : set.pairs) w.emplace_back(tag, static_cast<double>(c));
  return top_tags(w);
}

std::vector<WeightedTag> normalize_counts(const TagCountSet& set) {
  const double total = static_cast<double>(set.total());
  std::vector<WeightedTag> out;
  if (total <= 0.0) return out;
  for (const auto& [tag, c] : set.pairs) out.emplace_back(tag, static_cast<double>(c) / total);
  return out;
}

LabelProfile label_profile(const std::string& label, std::span<const TagCountSet> sets) {
  std::map<std::string, std::int64_t> pooled;
  std::size_t used = 0;
  for (const auto& s : sets) {
    if (s.pairs.empty()) continue;
    ++used;
    for (const auto& [tag, c] : s.pairs) pooled[tag] += c;
  }
  if (pooled.empty()) throw EmptyTagsError("no tags for label " + label);

  // Selection runs on the exact integer counts; normalizing is monotone so
  // the chosen set is the same as on the normalized values.
  std::vector<std::pair<std::string, std::int64_t>> raw(pooled.begin(), pooled.end());
  std::int64_t total = 0;
  for (const auto& [t, c] : raw) total += c;
  auto sorted = sorted_desc<std::int64_t>(raw);
  const std::size_t k = majority_prefix<std::int64_t>(sorted, total);

  LabelProfile p;
  p.label = label;
  p.excerpts = used;
  p.pooled_total = total;
  std::int64_t covered = 0;
  for (std::size_t i = 0; i < k; ++i) {
    covered += sorted[i].second;
    p.top.pairs.emplace_back(sorted[i].first, static_cast<double>(sorted[i].second) / static_cast<double>(total));
  }
  p.top.coverage = static_cast<double>(covered) / static_cast<double>(total);
  return p;
}

LabelProfile label_profile(const Corpus& corpus, const TagSnapshot& tags, const std::string& label) {
  std::vector<TagCountSet> sets;
  for (const auto& e : corpus.excerpts()) {
    if (e.label != label || !e.identified) continue;
    if (auto it = tags.find(e.id); it != tags.end()) sets.push_back(it->second);
  }
  return label_profile(label, sets);
}

std::vector<LabelProfile> label_profiles(const Corpus& corpus, const TagSnapshot& tags) {
  std::vector<LabelProfile> out;
  for (const auto& label : corpus.labels()) {
    try {
      out.push_back(label_profile(corpus, tags, label));
    } catch (const EmptyTagsError&) {
    }
  }
  return out;
}

double label_score(std::span<const WeightedTag> excerpt, const LabelProfile& profile) {
  std::unordered_map<std::string_view, double> weight;
  for (const auto& [tag, c] : excerpt) weight[tag] += c;
  double score = 0.0;
  for (const auto& [tag, d] : profile.top.pairs)
    if (auto it = weight.find(tag); it != weight.end()) score += d * it->second;
  return score;
}

double delta_g(std::span<const double> row, DeltaRule rule) {
  if (row.size() < 2) throw DegenerateRowError("delta_g: row needs at least two scores");
  std::vector<double> v(row.begin(), row.end());
  std::sort(v.begin(), v.end());
  if (v.front() == v.back()) throw DegenerateRowError("delta_g: all scores equal");
  if (rule == DeltaRule::range) return (v.back() - v.front()) / 10.0;
  double gap = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::max(gap, v[i] - v[i - 1]);
  return gap / 10.0;
}

std::size_t ScoreMatrix::index(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw LabelError("no profile for label '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

ScoreMatrix score_matrix(std::span<const LabelProfile> profiles, DeltaRule rule) {
  ScoreMatrix m;
  const std::size_t n = profiles.size();
  for (const auto& p : profiles) m.labels.push_back(p.label);
  m.scores.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t g = 0; g < n; ++g)
    for (std::size_t r = 0; r < n; ++r) m.scores[g][r] = label_score(profiles[g].top.pairs, profiles[r]);
  m.deltas.resize(n);
  for (std::size_t g = 0; g < n; ++g) m.deltas[g] = delta_g(m.scores[g], rule);
  return m;
}

std::string to_string(MislabelRule rule) {
  switch (rule) {
    case MislabelRule::low_own:
      return "low_own";
    case MislabelRule::high_other:
      return "high_other";
    case MislabelRule::none:
      break;
  }
  return "none";
}

MislabelRule parse_mislabel_rule(const std::string& s) {
  if (s == "low_own") return MislabelRule::low_own;
  if (s == "high_other") return MislabelRule::high_other;
  if (s == "none") return MislabelRule::none;
  throw ParseError("unknown mislabel rule '" + s + "'");
}

MislabelVerdict judge(const std::string& id, const std::string& label, const ScoreMatrix& matrix,
                      const std::vector<double>& scores) {
  const std::size_t g = matrix.index(label);
  MislabelVerdict v;
  v.id = id;
  v.label = label;
  v.own_score = scores[g];
  v.diagonal = matrix.diagonal(g);
  v.delta = matrix.deltas[g];
  bool have_other = false;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    if (r == g) continue;
    if (!have_other || scores[r] > v.best_other_score) {
      v.best_other_label = matrix.labels[r];
      v.best_other_score = scores[r];
      have_other = true;
    }
  }
  if (v.own_score < v.diagonal / 10.0)
    v.rule = MislabelRule::low_own;
  else if (have_other && v.best_other_score > v.diagonal - v.delta)
    v.rule = MislabelRule::high_other;
  v.flagged = v.rule != MislabelRule::none;
  std::vector<std::pair<std::string, double>> named;
  for (std::size_t r = 0; r < scores.size(); ++r) named.emplace_back(matrix.labels[r], scores[r]);
  v.scores = std::move(named);
  return v;
}

std::vector<MislabelVerdict> detect_mislabelings(const Corpus& corpus, const TagSnapshot& tags,
                                                 std::span<const LabelProfile> profiles,
                                                 const ScoreMatrix& matrix) {
  std::vector<MislabelVerdict> out;
  for (const auto& e : corpus.excerpts()) {
    if (!e.identified) continue;
    if (std::find(matrix.labels.begin(), matrix.labels.end(), e.label) == matrix.labels.end()) continue;
    auto it = tags.find(e.id);
    if (it == tags.end() || it->second.pairs.empty()) continue;
    const auto x = normalize_counts(it->second);
    std::vector<double> scores;
    for (const auto& p : profiles) scores.push_back(label_score(x, p));
    out.push_back(judge(e.id, e.label, matrix, scores));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::string format_verdicts_csv(std::span<const MislabelVerdict> verdicts) {
  std::string out = "id,label,own_score,diagonal,best_other_label,best_other_score,delta,rule\n";
  for (const auto& v : verdicts) {
    out += csv::join({v.id, v.label, fmt(v.own_score), fmt(v.diagonal), v.best_other_label,
                      fmt(v.best_other_score), fmt(v.delta), to_string(v.rule)});
    out += '\n';
  }
  return out;
}

}  // namespace caudit
