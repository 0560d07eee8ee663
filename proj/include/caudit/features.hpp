#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caudit/corpus.hpp"
#include "caudit/spectral.hpp"

namespace caudit {

inline constexpr std::size_t kMfccCount = 13;
inline constexpr std::size_t kFrameDims = kMfccCount + 3;
inline constexpr std::size_t kTextureDims = 2 * kFrameDims;

// Defaults are frozen; tests depend on them.
struct FeatureParams {
  FrameGrid grid{1024, 512};
  std::size_t mel_filters = 40;  // 13 linear + 27 log, Slaney layout
  double rolloff_fraction = 0.85;
  std::size_t texture_frames = 130;
  double log_floor = 1e-10;
};

struct FrameFeatures {
  std::array<double, kMfccCount> mfcc{};
  double zcr = 0.0;       // sign changes within the frame
  double centroid = 0.0;  // Hz
  double rolloff = 0.0;   // Hz

  std::array<double, kFrameDims> values() const;
};

// Slaney-style mel filterbank, one row per filter over the frame/2+1 bins.
std::vector<std::vector<double>> mel_filterbank(std::size_t frame_size, double sample_rate, std::size_t filters = 40);

// Throws TooShortError below one frame.
std::vector<FrameFeatures> frame_features(std::span<const float> samples, double sample_rate,
                                          const FeatureParams& params = {});

using FeatureVector = std::vector<double>;

// Means then variances (n-1) over non-overlapping blocks of
// params.texture_frames; the tail is dropped. Throws TooShortError when no
// full block exists.
std::vector<FeatureVector> texture_vectors(std::span<const FrameFeatures> frames, const FeatureParams& params = {});

std::vector<FeatureVector> excerpt_features(std::span<const float> samples, double sample_rate,
                                            const FeatureParams& params = {});

struct NormalizationMap {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> degenerate;  // dimensions with hi == lo; mapped to 0

  std::size_t dims() const { return lo.size(); }
  FeatureVector apply(const FeatureVector& v) const;
};

// Throws Error on an empty set or ragged dimensions.
NormalizationMap fit_normalization(std::span<const FeatureVector> train);
std::vector<FeatureVector> apply_normalization(const NormalizationMap& map, std::span<const FeatureVector> vectors);

// Excerpt id -> its texture vectors in window order.
using FeatureTable = std::map<std::string, std::vector<FeatureVector>, std::less<>>;

// Runs over every excerpt with audio in parallel. Throws IoError/FormatError
// naming the excerpt.
FeatureTable extract_corpus_features(const Corpus& corpus, const FeatureParams& params = {});

// CSV: id,window_index,f0..f{d-1}
std::string format_features_csv(const FeatureTable& table);
FeatureTable parse_features_csv(std::string_view text);
FeatureTable load_features(const std::filesystem::path& path);

}  // namespace caudit
