#include "caudit/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <cwctype>
#include <cmath>
#include <fstream>
#include <locale.h>
#include <set>

#include "json.hpp"

#include "caudit/csv.hpp"
#include "caudit/errors.hpp"

namespace caudit {

Corpus::Corpus(std::vector<std::string> labels) {
  for (auto& l : labels) add_label(l);
}

void Corpus::add_label(const std::string& label) {
  if (std::find(labels_.begin(), labels_.end(), label) == labels_.end()) labels_.push_back(label);
}

void Corpus::add(Excerpt e) {
  if (std::find(labels_.begin(), labels_.end(), e.label) == labels_.end())
    throw LabelError("unknown label '" + e.label + "' for excerpt " + e.id);
  if (by_id_.count(e.id)) throw DuplicateIdError("duplicate excerpt id " + e.id);
  e.identified = e.artist.has_value() || e.title.has_value();
  by_id_.emplace(e.id, excerpts_.size());
  excerpts_.push_back(std::move(e));
}

const Excerpt* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &excerpts_[it->second];
}

const Excerpt& Corpus::at(std::string_view id) const {
  if (auto* e = find(id)) return *e;
  throw UnknownExcerptError("unknown excerpt " + std::string(id));
}

std::size_t Corpus::label_index(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw LabelError("unknown label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

void Corpus::attach_audio_dir(const std::filesystem::path& dir) {
  for (auto& e : excerpts_) {
    auto flat = dir / (e.id + ".wav");
    auto nested = dir / e.label / (e.id + ".wav");
    if (!std::filesystem::exists(flat) && std::filesystem::exists(nested))
      e.audio_path = nested;
    else
      e.audio_path = flat;
  }
}

std::size_t Corpus::identified_count() const {
  return static_cast<std::size_t>(
      std::count_if(excerpts_.begin(), excerpts_.end(), [](const Excerpt& e) { return e.identified; }));
}

bool Corpus::same_contents(const Corpus& other) const {
  if (labels_ != other.labels_ || size() != other.size() || sample_rate != other.sample_rate)
    return false;
  for (const auto& e : excerpts_) {
    const Excerpt* o = other.find(e.id);
    if (!o || !(*o == e)) return false;
  }
  return true;
}

std::int64_t TagCountSet::total() const {
  std::int64_t t = 0;
  for (const auto& [tag, c] : pairs) t += c;
  return t;
}

namespace {

locale_t utf8_locale() {
  static locale_t loc = [] {
    locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(nullptr));
    if (!l) l = newlocale(LC_CTYPE_MASK, "C.utf8", static_cast<locale_t>(nullptr));
    return l;
  }();
  return loc;
}

// Decodes one UTF-8 code point; invalid bytes decode as themselves.
char32_t decode(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int n = (b0 & 0xE0) == 0xC0 ? 1 : (b0 & 0xF0) == 0xE0 ? 2 : (b0 & 0xF8) == 0xF0 ? 3 : 0;
  char32_t cp = n == 1 ? (b0 & 0x1F) : n == 2 ? (b0 & 0x0F) : (b0 & 0x07);
  for (int k = 1; k <= n; ++k) {
    int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      n = 0;
      break;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  if (n == 0) {
    ++i;
    return b0;
  }
  i += static_cast<std::size_t>(n) + 1;
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t cp) {
  if (cp < 0x80) return cp == ' ' || (cp >= '\t' && cp <= '\r');
  locale_t loc = utf8_locale();
  return loc && iswspace_l(static_cast<wint_t>(cp), loc);
}

char32_t lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  locale_t loc = utf8_locale();
  return loc ? static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc)) : cp;
}

std::optional<std::string> nonempty(std::string s) {
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

std::string normalize_tag(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  std::size_t i = 0;
  while (i < raw.size()) {
    char32_t cp = decode(raw, i);
    if (is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    encode(lower(cp), out);
  }
  return out;
}

Corpus parse_metadata(std::string_view text, std::optional<std::vector<std::string>> labels) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw ParseError("metadata: missing header", 1);
  const auto& header = rows.front().fields;
  const std::vector<std::string> expected{"id", "label", "artist", "title"};
  if (header.size() != 4 ||
      !std::equal(header.begin(), header.end(), expected.begin(), [](const auto& a, const auto& b) {
        return normalize_tag(a) == b;
      }))
    throw ParseError("metadata: header must be id,label,artist,title", rows.front().line);

  // Without an explicit label set, labels are sorted so that row order never
  // affects label indices.
  if (!labels) {
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r)
      if (rows[r].fields.size() > 1 && !rows[r].fields[1].empty()) seen.insert(rows[r].fields[1]);
    labels.emplace(seen.begin(), seen.end());
  }
  Corpus corpus(*labels);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 4)
      throw ParseError("metadata: expected 4 fields, got " + std::to_string(row.fields.size()), row.line);
    if (row.fields[0].empty()) throw ParseError("metadata: empty id", row.line);
    if (row.fields[1].empty()) throw ParseError("metadata: empty label", row.line);
    Excerpt e;
    e.id = row.fields[0];
    e.label = row.fields[1];
    e.artist = nonempty(row.fields[2]);
    e.title = nonempty(row.fields[3]);
    try {
      corpus.add(std::move(e));
    } catch (const LabelError& ex) {
      throw LabelError(std::string(ex.what()) + " (line " + std::to_string(row.line) + ")");
    } catch (const DuplicateIdError& ex) {
      throw DuplicateIdError(std::string(ex.what()) + " (line " + std::to_string(row.line) + ")");
    }
  }
  return corpus;
}

Corpus load_metadata(const std::filesystem::path& path, std::optional<std::vector<std::string>> labels) {
  return parse_metadata(csv::read_file(path), std::move(labels));
}

std::string format_metadata(const Corpus& corpus) {
  std::string out = "id,label,artist,title\n";
  for (const auto& e : corpus.excerpts()) {
    out += csv::join({e.id, e.label, e.artist.value_or(""), e.title.value_or("")});
    out += '\n';
  }
  return out;
}

void write_metadata(const Corpus& corpus, const std::filesystem::path& path) {
  csv::write_file(path, format_metadata(corpus));
}

TagSnapshot parse_tags(std::string_view json_text, const Corpus& corpus) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("tags: ") + ex.what());
  }
  if (!doc.is_array()) throw ParseError("tags: top level must be an array");

  TagSnapshot out;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string())
      throw ParseError("tags: entry without string id");
    const auto id = entry["id"].get<std::string>();
    if (!corpus.contains(id)) throw UnknownExcerptError("tags: excerpt " + id + " not in corpus");

    TagCountSet set;
    set.owner = id;
    const auto source = entry.value("source", std::string("song"));
    if (source == "song")
      set.source = TagSource::song;
    else if (source == "artist")
      set.source = TagSource::artist;
    else
      throw ParseError("tags: source must be song or artist for " + id);

    std::map<std::string, std::int64_t> merged;
    std::vector<std::string> order;
    if (entry.contains("tags")) {
      if (!entry["tags"].is_array()) throw ParseError("tags: 'tags' must be an array for " + id);
      for (const auto& t : entry["tags"]) {
        if (!t.contains("tag") || !t["tag"].is_string() || !t.contains("count") ||
            !t["count"].is_number_integer())
          throw ParseError("tags: malformed tag record for " + id);
        const auto count = t["count"].get<std::int64_t>();
        if (count < 0) throw ParseError("tags: negative count for " + id);
        if (count == 0) continue;
        auto tag = normalize_tag(t["tag"].get<std::string>());
        if (tag.empty()) continue;
        auto [it, fresh] = merged.emplace(tag, 0);
        if (fresh) order.push_back(tag);
        it->second += count;
      }
    }
    for (const auto& tag : order) set.pairs.emplace_back(tag, merged[tag]);

    if (auto it = out.find(id); it != out.end()) {
      // Repeated ids merge into one set.
      for (const auto& [tag, c] : set.pairs) {
        auto p = std::find_if(it->second.pairs.begin(), it->second.pairs.end(),
                              [&](const auto& q) { return q.first == tag; });
        if (p == it->second.pairs.end())
          it->second.pairs.emplace_back(tag, c);
        else
          p->second += c;
      }
    } else {
      out.emplace(id, std::move(set));
    }
  }
  return out;
}

TagSnapshot load_tags(const std::filesystem::path& path, const Corpus& corpus) {
  return parse_tags(csv::read_file(path), corpus);
}

std::vector<TagCoverage> tag_coverage(const Corpus& corpus, const TagSnapshot& tags) {
  std::vector<TagCoverage> out;
  for (const auto& l : corpus.labels()) out.push_back(TagCoverage{l});
  for (const auto& [id, set] : tags) {
    auto& row = out[corpus.label_index(corpus.at(id).label)];
    if (set.pairs.empty()) continue;
    const auto n = static_cast<std::int64_t>(set.pairs.size());
    if (set.source == TagSource::song) {
      ++row.song;
      row.song_tags += n;
    } else {
      ++row.artist;
      row.artist_tags += n;
    }
  }
  return out;
}

// --- WAV -------------------------------------------------------------------

namespace {

std::uint32_t rd32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
std::uint16_t rd16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void wr32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void wr16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing audio file " + path.string());
  const std::string bytes = csv::read_file(path);
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(b, "RIFF", 4) != 0 || std::memcmp(b + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const unsigned char* chunk = b + pos;
    const std::uint32_t size = rd32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, n - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError(path.string() + ": short fmt chunk");
      format = rd16(b + body);
      channels = rd16(b + body + 2);
      rate = rd32(b + body + 4);
      bits = rd16(b + body + 14);
      if (format == 0xFFFE && avail >= 26) format = rd16(b + body + 24);  // WAVE_FORMAT_EXTENSIBLE
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = b + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (!format) throw FormatError(path.string() + ": missing fmt chunk");
  if (!data) throw FormatError(path.string() + ": missing data chunk");

  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.channels = channels;
  if (format == 1 && bits == 16) {
    out.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < out.samples.size(); ++i)
      out.samples[i] = static_cast<float>(static_cast<std::int16_t>(rd16(data + 2 * i))) / 32768.0f;
  } else if (format == 3 && bits == 32) {
    out.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      std::uint32_t u = rd32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, sizeof f);
      out.samples[i] = f;
    }
  } else {
    throw FormatError(path.string() + ": unsupported encoding (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bits)");
  }
  return out;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate,
               bool float32) {
  const std::uint16_t bits = float32 ? 32 : 16;
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * (bits / 8));
  std::string s;
  s.reserve(44 + data_size);
  s += "RIFF";
  wr32(s, 36 + data_size);
  s += "WAVEfmt ";
  wr32(s, 16);
  wr16(s, float32 ? 3 : 1);
  wr16(s, 1);
  wr32(s, static_cast<std::uint32_t>(sample_rate));
  wr32(s, static_cast<std::uint32_t>(sample_rate) * (bits / 8));
  wr16(s, bits / 8);
  wr16(s, bits);
  s += "data";
  wr32(s, data_size);
  for (float x : samples) {
    if (float32) {
      std::uint32_t u;
      std::memcpy(&u, &x, sizeof u);
      wr32(s, u);
    } else {
      const float c = std::clamp(x, -1.0f, 1.0f);
      const long v = std::lround(c * 32768.0f);
      wr16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
    }
  }
  csv::write_file(path, s);
}

Samples load_audio(const Corpus& corpus, const Excerpt& excerpt) {
  if (!excerpt.audio_path) throw IoError("no audio path for excerpt " + excerpt.id);
  WavData w = read_wav(*excerpt.audio_path);
  if (w.channels != 1)
    throw FormatError(excerpt.id + ": expected mono audio, got " + std::to_string(w.channels) + " channels");
  if (w.sample_rate != corpus.sample_rate)
    throw FormatError(excerpt.id + ": expected " + std::to_string(corpus.sample_rate) + " Hz, got " +
                      std::to_string(w.sample_rate));
  return std::move(w.samples);
}

}  // namespace caudit
