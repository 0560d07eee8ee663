#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace caudit {

using Samples = std::vector<float>;

struct Excerpt {
  std::string id;
  std::string label;
  std::optional<std::string> artist;
  std::optional<std::string> title;
  bool identified = false;
  std::optional<std::filesystem::path> audio_path;

  friend bool operator==(const Excerpt&, const Excerpt&) = default;
};

// Labelled excerpt collection over a fixed, ordered label set.
class Corpus {
 public:
  static constexpr int kDefaultSampleRate = 22050;
  static constexpr double kDefaultDuration = 30.0;

  Corpus() = default;
  explicit Corpus(std::vector<std::string> labels);

  // Validates label membership and id uniqueness.
  void add(Excerpt e);
  // Adds to the label set (no-op if present).
  void add_label(const std::string& label);

  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<Excerpt>& excerpts() const { return excerpts_; }
  std::size_t size() const { return excerpts_.size(); }
  bool empty() const { return excerpts_.empty(); }

  const Excerpt* find(std::string_view id) const;
  const Excerpt& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  // Index of label in labels(); throws LabelError when absent.
  std::size_t label_index(std::string_view label) const;

  int sample_rate = kDefaultSampleRate;
  double excerpt_duration = kDefaultDuration;

  // Sets audio_path for every excerpt: <dir>/<id>.wav, falling back to
  // <dir>/<label>/<id>.wav when only that one exists.
  void attach_audio_dir(const std::filesystem::path& dir);

  std::size_t identified_count() const;

  // Equal up to excerpt order.
  bool same_contents(const Corpus& other) const;

 private:
  std::vector<std::string> labels_;
  std::vector<Excerpt> excerpts_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

enum class TagSource { song, artist };

struct TagCountSet {
  std::string owner;
  std::vector<std::pair<std::string, std::int64_t>> pairs;
  TagSource source = TagSource::song;

  std::int64_t total() const;
};

using TagSnapshot = std::map<std::string, TagCountSet>;

struct TagCoverage {
  std::string label;
  std::size_t song = 0;
  std::size_t artist = 0;
  std::int64_t song_tags = 0;    // number of retained song tags
  std::int64_t artist_tags = 0;  // number of retained artist tags
};

// Lower-case (Unicode simple case mapping), trim, collapse runs of
// whitespace to one ASCII space.
std::string normalize_tag(std::string_view raw);

// Metadata CSV: header id,label,artist,title (RFC-4180 quoting). Without an
// explicit label set the labels are the sorted distinct values.
Corpus load_metadata(const std::filesystem::path& path,
                     std::optional<std::vector<std::string>> labels = std::nullopt);
Corpus parse_metadata(std::string_view text,
                      std::optional<std::vector<std::string>> labels = std::nullopt);
std::string format_metadata(const Corpus& corpus);
void write_metadata(const Corpus& corpus, const std::filesystem::path& path);

// Tag snapshot JSON: [{"id","source","tags":[{"tag","count"}]}].
TagSnapshot load_tags(const std::filesystem::path& path, const Corpus& corpus);
TagSnapshot parse_tags(std::string_view json_text, const Corpus& corpus);
std::vector<TagCoverage> tag_coverage(const Corpus& corpus, const TagSnapshot& tags);

// Mono RIFF WAVE reader/writer (PCM 16-bit or IEEE float 32-bit).
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  Samples samples;  // interleaved if channels > 1
};
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate,
               bool float32 = false);

// Reads the excerpt's audio and checks it against the corpus format.
Samples load_audio(const Corpus& corpus, const Excerpt& excerpt);

}  // namespace caudit
