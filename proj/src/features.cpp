#include "caudit/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "caudit/csv.hpp"
#include "caudit/errors.hpp"
#include "caudit/parallel.hpp"

namespace caudit {

std::array<double, kFrameDims> FrameFeatures::values() const {
  std::array<double, kFrameDims> v{};
  std::copy(mfcc.begin(), mfcc.end(), v.begin());
  v[kMfccCount] = zcr;
  v[kMfccCount + 1] = centroid;
  v[kMfccCount + 2] = rolloff;
  return v;
}

std::vector<std::vector<double>> mel_filterbank(std::size_t frame_size, double sample_rate, std::size_t filters) {
  // 13 linear filters from 133.33 Hz at 66.67 Hz spacing, the rest
  // log-spaced by 1.0711703; edges k and k+2, peak at k+1.
  constexpr std::size_t kLinear = 13;
  constexpr double kLowest = 133.3333;
  constexpr double kLinearSpacing = 66.66666666;
  constexpr double kLogSpacing = 1.0711703;
  if (filters <= kLinear) throw Error("mel_filterbank: need more than 13 filters");

  std::vector<double> edge(filters + 2);
  for (std::size_t i = 0; i < kLinear; ++i) edge[i] = kLowest + static_cast<double>(i) * kLinearSpacing;
  for (std::size_t i = kLinear; i < edge.size(); ++i)
    edge[i] = edge[kLinear - 1] * std::pow(kLogSpacing, static_cast<double>(i - kLinear + 1));

  const std::size_t bins = frame_size / 2 + 1;
  std::vector<std::vector<double>> bank(filters, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < filters; ++m) {
    const double lo = edge[m], mid = edge[m + 1], hi = edge[m + 2];
    const double height = 2.0 / (hi - lo);  // unit area
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(frame_size);
      if (f > lo && f <= mid)
        bank[m][k] = height * (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        bank[m][k] = height * (hi - f) / (hi - mid);
    }
  }
  return bank;
}

namespace {

// Orthonormal DCT-II rows 0..count-1 for an n-point input.
std::vector<std::vector<double>> dct_matrix(std::size_t count, std::size_t n) {
  std::vector<std::vector<double>> d(count, std::vector<double>(n));
  for (std::size_t k = 0; k < count; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      d[k][i] = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(i) + 0.5) /
                                 static_cast<double>(n));
  }
  return d;
}

std::size_t zero_crossings(std::span<const float> frame) {
  std::size_t z = 0;
  for (std::size_t i = 1; i < frame.size(); ++i)
    if ((frame[i - 1] >= 0.0f) != (frame[i] >= 0.0f)) ++z;
  return z;
}

}  // namespace

std::vector<FrameFeatures> frame_features(std::span<const float> samples, double sample_rate,
                                          const FeatureParams& params) {
  const auto spec = magnitude_stft(samples, params.grid);
  const std::size_t n = params.grid.frame_size;
  const auto bank = mel_filterbank(n, sample_rate, params.mel_filters);
  const auto dct = dct_matrix(kMfccCount, params.mel_filters);
  const double bin_hz = sample_rate / static_cast<double>(n);

  std::vector<FrameFeatures> out(spec.frames());
  std::vector<double> logmel(params.mel_filters);
  for (std::size_t f = 0; f < spec.frames(); ++f) {
    const auto mag = spec.frame(f);
    FrameFeatures& ff = out[f];

    for (std::size_t m = 0; m < bank.size(); ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < mag.size(); ++k) e += bank[m][k] * mag[k];
      logmel[m] = std::log10(std::max(e, params.log_floor));
    }
    for (std::size_t c = 0; c < kMfccCount; ++c) {
      double s = 0.0;
      for (std::size_t m = 0; m < logmel.size(); ++m) s += dct[c][m] * logmel[m];
      ff.mfcc[c] = s;
    }

    double total = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      total += mag[k];
      weighted += static_cast<double>(k) * bin_hz * mag[k];
    }
    if (total > 0.0) {
      ff.centroid = weighted / total;
      double running = 0.0;
      std::size_t k = 0;
      for (; k < mag.size(); ++k) {
        running += mag[k];
        if (running >= params.rolloff_fraction * total) break;
      }
      ff.rolloff = static_cast<double>(std::min(k, mag.size() - 1)) * bin_hz;
    }
    ff.zcr = static_cast<double>(zero_crossings(samples.subspan(f * params.grid.hop, n)));
  }
  return out;
}

std::vector<FeatureVector> texture_vectors(std::span<const FrameFeatures> frames, const FeatureParams& params) {
  const std::size_t block = params.texture_frames;
  if (block < 2 || frames.size() < block)
    throw TooShortError("texture_vectors: need at least " + std::to_string(block) + " frames, got " +
                        std::to_string(frames.size()));
  std::vector<FeatureVector> out;
  for (std::size_t start = 0; start + block <= frames.size(); start += block) {
    FeatureVector v(kTextureDims, 0.0);
    for (std::size_t i = start; i < start + block; ++i) {
      const auto x = frames[i].values();
      for (std::size_t d = 0; d < kFrameDims; ++d) v[d] += x[d];
    }
    for (std::size_t d = 0; d < kFrameDims; ++d) v[d] /= static_cast<double>(block);
    for (std::size_t i = start; i < start + block; ++i) {
      const auto x = frames[i].values();
      for (std::size_t d = 0; d < kFrameDims; ++d) {
        const double dev = x[d] - v[d];
        v[kFrameDims + d] += dev * dev;
      }
    }
    for (std::size_t d = 0; d < kFrameDims; ++d) v[kFrameDims + d] /= static_cast<double>(block - 1);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<FeatureVector> excerpt_features(std::span<const float> samples, double sample_rate,
                                            const FeatureParams& params) {
  const auto frames = frame_features(samples, sample_rate, params);
  return texture_vectors(frames, params);
}

FeatureVector NormalizationMap::apply(const FeatureVector& v) const {
  if (v.size() != lo.size()) throw Error("normalization: dimension mismatch");
  FeatureVector out(v.size());
  for (std::size_t d = 0; d < v.size(); ++d) out[d] = hi[d] > lo[d] ? (v[d] - lo[d]) / (hi[d] - lo[d]) : 0.0;
  return out;
}

NormalizationMap fit_normalization(std::span<const FeatureVector> train) {
  if (train.empty()) throw Error("fit_normalization: no training vectors");
  NormalizationMap map;
  map.lo = map.hi = train.front();
  for (const auto& v : train) {
    if (v.size() != map.lo.size()) throw Error("fit_normalization: ragged feature vectors");
    for (std::size_t d = 0; d < v.size(); ++d) {
      map.lo[d] = std::min(map.lo[d], v[d]);
      map.hi[d] = std::max(map.hi[d], v[d]);
    }
  }
  for (std::size_t d = 0; d < map.lo.size(); ++d)
    if (!(map.hi[d] > map.lo[d])) map.degenerate.push_back(d);
  return map;
}

std::vector<FeatureVector> apply_normalization(const NormalizationMap& map, std::span<const FeatureVector> vectors) {
  std::vector<FeatureVector> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(map.apply(v));
  return out;
}

FeatureTable extract_corpus_features(const Corpus& corpus, const FeatureParams& params) {
  const auto& ex = corpus.excerpts();
  std::vector<std::vector<FeatureVector>> slots(ex.size());
  parallel_for(ex.size(), [&](std::size_t i) {
    const Samples audio = load_audio(corpus, ex[i]);
    try {
      slots[i] = excerpt_features(audio, corpus.sample_rate, params);
    } catch (const TooShortError& e) {
      throw TooShortError(ex[i].id + ": " + e.what());
    }
  });
  FeatureTable table;
  for (std::size_t i = 0; i < ex.size(); ++i) table.emplace(ex[i].id, std::move(slots[i]));
  return table;
}

std::string format_features_csv(const FeatureTable& table) {
  std::size_t dims = 0;
  for (const auto& [id, vs] : table)
    if (!vs.empty()) {
      dims = vs.front().size();
      break;
    }
  std::string out = "id,window_index";
  for (std::size_t d = 0; d < dims; ++d) out += ",f" + std::to_string(d);
  out += '\n';
  char buf[40];
  for (const auto& [id, vs] : table) {
    for (std::size_t w = 0; w < vs.size(); ++w) {
      out += csv::quote(id) + ',' + std::to_string(w);
      for (double x : vs[w]) {
        std::snprintf(buf, sizeof buf, ",%.17g", x);
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

FeatureTable parse_features_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) return {};
  const auto& header = rows.front().fields;
  if (header.size() < 2 || header[0] != "id" || header[1] != "window_index")
    throw ParseError("features: header must start with id,window_index", rows.front().line);
  const std::size_t dims = header.size() - 2;
  FeatureTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != header.size()) throw ParseError("features: wrong field count", rows[r].line);
    std::size_t window = 0;
    FeatureVector v(dims);
    try {
      std::size_t used = 0;
      window = std::stoul(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("window");
      for (std::size_t d = 0; d < dims; ++d) {
        v[d] = std::stod(f[d + 2], &used);
        if (used != f[d + 2].size()) throw std::invalid_argument("value");
      }
    } catch (const std::exception&) {
      throw ParseError("features: bad number", rows[r].line);
    }
    auto& vs = table[f[0]];
    if (window != vs.size()) throw ParseError("features: windows of " + f[0] + " out of order", rows[r].line);
    vs.push_back(std::move(v));
  }
  return table;
}

FeatureTable load_features(const std::filesystem::path& path) { return parse_features_csv(csv::read_file(path)); }

}  // namespace caudit
