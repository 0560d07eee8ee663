#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "caudit/corpus.hpp"
#include "caudit/spectral.hpp"

namespace caudit {

// Landmark fingerprint settings. Defaults are frozen: the synthetic
// planted-duplicate corpus in the tests was measured with these values.
struct FingerprintParams {
  FrameGrid grid{1024, 512};
  std::size_t neighborhood_frames = 15;  // full width, centred on the peak
  std::size_t neighborhood_bins = 15;
  std::size_t max_peaks_per_frame = 5;
  double floor_above_median_db = 10.0;
  std::size_t fan_out = 8;
  std::uint32_t min_delta_frames = 1;
  std::uint32_t max_delta_frames = 64;
};

inline constexpr double kDefaultDuplicateThreshold = 0.25;

struct Peak {
  std::uint32_t frame = 0;
  std::uint32_t bin = 0;
  double magnitude_db = 0.0;

  friend bool operator==(const Peak&, const Peak&) = default;
};

struct PeakConstellation {
  std::string owner;
  std::vector<Peak> peaks;  // sorted by (frame, bin)
};

struct Landmark {
  std::uint32_t key = 0;           // anchor bin | target bin | delta frames
  std::uint32_t anchor_frame = 0;

  friend bool operator==(const Landmark&, const Landmark&) = default;
  friend auto operator<=>(const Landmark&, const Landmark&) = default;
};

struct HashSet {
  std::string owner;
  std::vector<Landmark> hashes;  // sorted by (key, anchor_frame)

  std::size_t size() const { return hashes.size(); }
  bool empty() const { return hashes.empty(); }
  friend bool operator==(const HashSet&, const HashSet&) = default;
};

std::uint32_t pack_landmark(std::uint32_t anchor_bin, std::uint32_t target_bin, std::uint32_t delta_frames);
void unpack_landmark(std::uint32_t key, std::uint32_t& anchor_bin, std::uint32_t& target_bin,
                     std::uint32_t& delta_frames);

struct MatchScore {
  std::string id_a;
  std::string id_b;
  std::size_t aligned_hits = 0;
  std::int64_t offset_frames = 0;  // frame(b) - frame(a) at the modal offset
  double score = 0.0;               // aligned_hits / min(|a|, |b|)
};

PeakConstellation find_peaks(const Spectrogram& spec, const FingerprintParams& params = {});
HashSet hash_peaks(const PeakConstellation& peaks, const FingerprintParams& params = {});

// Throws TooShortError for buffers shorter than one frame.
HashSet compute_fingerprint(std::span<const float> samples, const FingerprintParams& params = {},
                            std::string owner = {});

MatchScore match(const HashSet& a, const HashSet& b);

// Connected components of the match graph (edge score >= threshold), as
// sorted id groups in lexicographic order, plus every qualifying pair.
struct RepetitionScan {
  std::vector<std::vector<std::string>> groups;
  std::vector<MatchScore> matches;  // id_a < id_b, sorted
  std::size_t pairs_compared = 0;   // n(n-1)/2

  std::size_t member_count() const;
};

// All-pairs scan using an inverted index; agrees with pairwise match().
RepetitionScan scan_repetitions(std::span<const HashSet> sets, double threshold = kDefaultDuplicateThreshold);

// Fingerprints every excerpt of the corpus (in parallel) and scans.
// Throws IoError naming the excerpt when audio is missing.
RepetitionScan find_exact_repetitions(const Corpus& corpus, double threshold = kDefaultDuplicateThreshold,
                                      const FingerprintParams& params = {});
std::vector<HashSet> fingerprint_corpus(const Corpus& corpus, const FingerprintParams& params = {});

// Fingerprint cache: "DFPK1" magic, then little-endian records.
void write_fingerprint_cache(const std::filesystem::path& path, std::span<const HashSet> sets,
                             const FingerprintParams& params = {});
std::vector<HashSet> read_fingerprint_cache(const std::filesystem::path& path,
                                            const FingerprintParams& params = {});

std::string format_matches_csv(std::span<const MatchScore> matches);

}  // namespace caudit
