#include "caudit/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "caudit/csv.hpp"
#include "caudit/errors.hpp"
#include "caudit/parallel.hpp"

namespace caudit {

namespace {

constexpr std::uint32_t kBinBits = 10;
constexpr std::uint32_t kDeltaBits = 7;
constexpr double kMagnitudeFloor = 1e-10;
// Frame rounding of sub-hop shifts moves landmarks by up to one frame.
constexpr std::int64_t kFrameTolerance = 1;

// Sliding max over a window of half-width h along a strided line.
void sliding_max(const double* src, double* dst, std::size_t n, std::size_t stride, std::size_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= h ? i - h : 0;
    const std::size_t hi = std::min(n - 1, i + h);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = lo; j <= hi; ++j) m = std::max(m, src[j * stride]);
    dst[i * stride] = m;
  }
}

struct Candidate {
  std::uint32_t x;  // index into a.hashes
  std::uint32_t y;  // index into b.hashes
  std::int64_t offset;
};

struct Alignment {
  std::int64_t offset = 0;
  std::size_t hits = 0;
};

// Distinct hashes on each side among candidates within the window; the
// one-to-one hit count is the smaller of the two.
std::size_t window_hits(const std::vector<Candidate>& c, std::int64_t centre, std::int64_t tol,
                        std::vector<std::uint32_t>& xs, std::vector<std::uint32_t>& ys) {
  xs.clear();
  ys.clear();
  for (const auto& m : c)
    if (std::llabs(m.offset - centre) <= tol) {
      xs.push_back(m.x);
      ys.push_back(m.y);
    }
  auto distinct = [](std::vector<std::uint32_t>& v) {
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
  };
  return std::min(distinct(xs), distinct(ys));
}

// Offset window of width 2*tol+1 with the most candidates; ties go to the
// most one-to-one hits, then the smallest |offset|. The reported offset is
// the single most populated offset inside the chosen window.
Alignment align(std::vector<Candidate>& c, std::int64_t tol) {
  Alignment best;
  if (c.empty()) return best;
  std::sort(c.begin(), c.end(), [](const Candidate& p, const Candidate& q) { return p.offset < q.offset; });
  std::vector<std::pair<std::int64_t, std::size_t>> hist;
  for (const auto& m : c) {
    if (hist.empty() || hist.back().first != m.offset) hist.emplace_back(m.offset, 0);
    ++hist.back().second;
  }
  auto count_at = [&](std::int64_t o) -> std::size_t {
    auto it = std::lower_bound(hist.begin(), hist.end(), o, [](const auto& h, std::int64_t v) { return h.first < v; });
    return it != hist.end() && it->first == o ? it->second : 0;
  };
  std::size_t best_window = 0;
  std::vector<std::int64_t> centres;
  for (const auto& [o, n] : hist) {
    std::size_t w = 0;
    for (std::int64_t d = -tol; d <= tol; ++d) w += count_at(o + d);
    if (w > best_window) {
      best_window = w;
      centres.assign(1, o);
    } else if (w == best_window) {
      centres.push_back(o);
    }
  }
  std::vector<std::uint32_t> xs, ys;
  std::int64_t centre = 0;
  bool have = false;
  for (std::int64_t o : centres) {
    const std::size_t hits = window_hits(c, o, tol, xs, ys);
    const bool better = !have || hits > best.hits ||
                        (hits == best.hits && (std::llabs(o) < std::llabs(centre) ||
                                               (std::llabs(o) == std::llabs(centre) && o < centre)));
    if (better) {
      best.hits = hits;
      centre = o;
      have = true;
    }
  }
  std::size_t peak = 0;
  best.offset = centre;
  for (std::int64_t d = 0; d <= tol; ++d)
    for (std::int64_t o : {centre - d, centre + d}) {
      const std::size_t n = count_at(o);
      if (n > peak) {
        peak = n;
        best.offset = o;
      }
    }
  return best;
}

double ratio(std::size_t hits, std::size_t a, std::size_t b) {
  const std::size_t m = std::min(a, b);
  return m == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(m);
}

void check_params(const FingerprintParams& p) {
  if (p.grid.frame_size / 2 + 1 > (1u << kBinBits))
    throw Error("fingerprint: frame size too large for landmark packing");
  if (p.max_delta_frames >= (1u << kDeltaBits) || p.min_delta_frames == 0 ||
      p.min_delta_frames > p.max_delta_frames)
    throw Error("fingerprint: delta-frame window must satisfy 1 <= min <= max < 128");
}

}  // namespace

std::uint32_t pack_landmark(std::uint32_t anchor_bin, std::uint32_t target_bin, std::uint32_t delta_frames) {
  return (anchor_bin << (kBinBits + kDeltaBits)) | (target_bin << kDeltaBits) | delta_frames;
}

void unpack_landmark(std::uint32_t key, std::uint32_t& anchor_bin, std::uint32_t& target_bin,
                     std::uint32_t& delta_frames) {
  delta_frames = key & ((1u << kDeltaBits) - 1);
  target_bin = (key >> kDeltaBits) & ((1u << kBinBits) - 1);
  anchor_bin = key >> (kBinBits + kDeltaBits);
}

PeakConstellation find_peaks(const Spectrogram& spec, const FingerprintParams& params) {
  const std::size_t frames = spec.frames();
  const std::size_t bins = spec.bins();
  PeakConstellation out;
  if (frames == 0 || bins == 0) return out;

  std::vector<double> db(frames * bins);
  for (std::size_t i = 0; i < db.size(); ++i)
    db[i] = 20.0 * std::log10(std::max(spec.data()[i], kMagnitudeFloor));

  // Median over cells above the magnitude floor so digital silence padding
  // does not drag the threshold down.
  std::vector<double> scratch;
  for (std::size_t i = 0; i < db.size(); ++i)
    if (spec.data()[i] > kMagnitudeFloor) scratch.push_back(db[i]);
  if (scratch.empty()) return out;
  auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(scratch.size() / 2);
  std::nth_element(scratch.begin(), mid, scratch.end());
  const double floor_db = *mid + params.floor_above_median_db;

  // Separable max filter: along bins, then along frames.
  std::vector<double> row_max(db.size()), local_max(db.size());
  for (std::size_t f = 0; f < frames; ++f)
    sliding_max(db.data() + f * bins, row_max.data() + f * bins, bins, 1, params.neighborhood_bins / 2);
  for (std::size_t k = 0; k < bins; ++k)
    sliding_max(row_max.data() + k, local_max.data() + k, frames, bins, params.neighborhood_frames / 2);

  std::vector<Peak> frame_peaks;
  for (std::size_t f = 0; f < frames; ++f) {
    frame_peaks.clear();
    for (std::size_t k = 0; k < bins; ++k) {
      const double v = db[f * bins + k];
      if (v > floor_db && v >= local_max[f * bins + k])
        frame_peaks.push_back({static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(k), v});
    }
    if (frame_peaks.size() > params.max_peaks_per_frame) {
      std::stable_sort(frame_peaks.begin(), frame_peaks.end(),
                       [](const Peak& a, const Peak& b) { return a.magnitude_db > b.magnitude_db; });
      frame_peaks.resize(params.max_peaks_per_frame);
      std::sort(frame_peaks.begin(), frame_peaks.end(), [](const Peak& a, const Peak& b) { return a.bin < b.bin; });
    }
    out.peaks.insert(out.peaks.end(), frame_peaks.begin(), frame_peaks.end());
  }
  return out;
}

HashSet hash_peaks(const PeakConstellation& peaks, const FingerprintParams& params) {
  check_params(params);
  HashSet out;
  out.owner = peaks.owner;
  const auto& p = peaks.peaks;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::size_t paired = 0;
    for (std::size_t j = i + 1; j < p.size() && paired < params.fan_out; ++j) {
      const std::uint32_t dt = p[j].frame - p[i].frame;
      if (dt < params.min_delta_frames) continue;
      if (dt > params.max_delta_frames) break;
      out.hashes.push_back({pack_landmark(p[i].bin, p[j].bin, dt), p[i].frame});
      ++paired;
    }
  }
  std::sort(out.hashes.begin(), out.hashes.end());
  return out;
}

HashSet compute_fingerprint(std::span<const float> samples, const FingerprintParams& params, std::string owner) {
  check_params(params);
  const Spectrogram spec = magnitude_stft(samples, params.grid);
  PeakConstellation peaks = find_peaks(spec, params);
  peaks.owner = owner;
  HashSet h = hash_peaks(peaks, params);
  h.owner = std::move(owner);
  return h;
}

namespace {

// Keys equal up to a +-tolerance on the delta-frames field.
template <typename Visit>
void for_each_tolerant_key(std::uint32_t key, std::uint32_t tol, Visit&& visit) {
  std::uint32_t anchor, target, dt;
  unpack_landmark(key, anchor, target, dt);
  const std::uint32_t lo = dt > tol ? dt - tol : 1;
  for (std::uint32_t d = lo; d <= dt + tol && d < (1u << kDeltaBits); ++d) visit(pack_landmark(anchor, target, d));
}

}  // namespace

MatchScore match(const HashSet& a, const HashSet& b) {
  MatchScore m;
  m.id_a = a.owner;
  m.id_b = b.owner;
  std::vector<Candidate> cands;
  const auto& hb = b.hashes;
  for (std::size_t x = 0; x < a.hashes.size(); ++x) {
    const auto& h = a.hashes[x];
    for_each_tolerant_key(h.key, kFrameTolerance, [&](std::uint32_t key) {
      auto lo = std::lower_bound(hb.begin(), hb.end(), key, [](const Landmark& l, std::uint32_t k) { return l.key < k; });
      for (auto it = lo; it != hb.end() && it->key == key; ++it)
        cands.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(it - hb.begin()),
                         static_cast<std::int64_t>(it->anchor_frame) - static_cast<std::int64_t>(h.anchor_frame)});
    });
  }
  const Alignment al = align(cands, kFrameTolerance);
  m.offset_frames = al.offset;
  m.aligned_hits = al.hits;
  m.score = ratio(al.hits, a.size(), b.size());
  return m;
}

std::size_t RepetitionScan::member_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

RepetitionScan scan_repetitions(std::span<const HashSet> sets, double threshold) {
  const std::size_t n = sets.size();
  RepetitionScan scan;
  scan.pairs_compared = n < 2 ? 0 : n * (n - 1) / 2;

  struct Posting {
    std::uint32_t key;
    std::uint32_t set;
    std::uint32_t hash;
  };
  std::vector<Posting> index;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t h = 0; h < sets[s].hashes.size(); ++h)
      index.push_back({sets[s].hashes[h].key, static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(h)});
  std::sort(index.begin(), index.end(), [](const Posting& x, const Posting& y) {
    return std::tie(x.key, x.set, x.hash) < std::tie(y.key, y.set, y.hash);
  });

  // Per query set a: candidates against every b > a, aligned exactly as in match().
  std::vector<std::vector<MatchScore>> found(n);
  parallel_for(n, [&](std::size_t a) {
    std::unordered_map<std::uint32_t, std::vector<Candidate>> cands;
    const auto& ha = sets[a].hashes;
    for (std::size_t x = 0; x < ha.size(); ++x) {
      for_each_tolerant_key(ha[x].key, kFrameTolerance, [&](std::uint32_t key) {
        auto lo = std::lower_bound(index.begin(), index.end(), key,
                                   [](const Posting& p, std::uint32_t k) { return p.key < k; });
        for (auto it = lo; it != index.end() && it->key == key; ++it) {
          if (it->set <= a) continue;
          const auto frame_b = sets[it->set].hashes[it->hash].anchor_frame;
          cands[it->set].push_back({static_cast<std::uint32_t>(x), it->hash,
                                    static_cast<std::int64_t>(frame_b) - static_cast<std::int64_t>(ha[x].anchor_frame)});
        }
      });
    }
    for (auto& [b, list] : cands) {
      const Alignment al = align(list, kFrameTolerance);
      const double score = ratio(al.hits, sets[a].size(), sets[b].size());
      if (score >= threshold) {
        MatchScore m{sets[a].owner, sets[b].owner, al.hits, al.offset, score};
        if (m.id_b < m.id_a) {
          std::swap(m.id_a, m.id_b);
          m.offset_frames = -m.offset_frames;
        }
        found[a].push_back(std::move(m));
      }
    }
  });

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t s = 0; s < n; ++s) pos.emplace(sets[s].owner, s);
  for (auto& list : found)
    for (auto& m : list) {
      parent[root(pos.at(m.id_a))] = root(pos.at(m.id_b));
      scan.matches.push_back(std::move(m));
    }
  std::sort(scan.matches.begin(), scan.matches.end(),
            [](const MatchScore& x, const MatchScore& y) { return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b); });

  std::unordered_map<std::size_t, std::vector<std::string>> comps;
  for (std::size_t s = 0; s < n; ++s) comps[root(s)].push_back(sets[s].owner);
  for (auto& [r, members] : comps) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end());
    scan.groups.push_back(std::move(members));
  }
  std::sort(scan.groups.begin(), scan.groups.end());
  return scan;
}

std::vector<HashSet> fingerprint_corpus(const Corpus& corpus, const FingerprintParams& params) {
  const auto& ex = corpus.excerpts();
  for (const auto& e : ex)
    if (!e.audio_path || !std::filesystem::exists(*e.audio_path))
      throw IoError("missing audio for excerpt " + e.id);
  std::vector<HashSet> sets(ex.size());
  parallel_for(ex.size(), [&](std::size_t i) {
    const Samples s = load_audio(corpus, ex[i]);
    sets[i] = compute_fingerprint(s, params, ex[i].id);
  });
  return sets;
}

RepetitionScan find_exact_repetitions(const Corpus& corpus, double threshold, const FingerprintParams& params) {
  const auto sets = fingerprint_corpus(corpus, params);
  return scan_repetitions(sets, threshold);
}

// --- cache -------------------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'D', 'F', 'P', 'K', '1'};

void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;
  std::uint32_t u32() {
    if (pos + 4 > bytes.size()) throw FormatError("fingerprint cache truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::string str(std::size_t n) {
    if (pos + n > bytes.size()) throw FormatError("fingerprint cache truncated");
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_fingerprint_cache(const std::filesystem::path& path, std::span<const HashSet> sets,
                             const FingerprintParams& params) {
  std::string s(kMagic, sizeof kMagic);
  put32(s, static_cast<std::uint32_t>(params.grid.frame_size));
  put32(s, static_cast<std::uint32_t>(params.grid.hop));
  put32(s, static_cast<std::uint32_t>(sets.size()));
  for (const auto& h : sets) {
    put32(s, static_cast<std::uint32_t>(h.owner.size()));
    s += h.owner;
    put32(s, static_cast<std::uint32_t>(h.hashes.size()));
    for (const auto& l : h.hashes) {
      put32(s, l.key);
      put32(s, l.anchor_frame);
    }
  }
  csv::write_file(path, s);
}

std::vector<HashSet> read_fingerprint_cache(const std::filesystem::path& path, const FingerprintParams& params) {
  const std::string bytes = csv::read_file(path);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError(path.string() + ": not a DFPK1 fingerprint cache");
  Reader r{bytes, sizeof kMagic};
  const auto frame = r.u32();
  const auto hop = r.u32();
  if (frame != params.grid.frame_size || hop != params.grid.hop)
    throw FormatError(path.string() + ": cache built with different frame/hop");
  const auto count = r.u32();
  std::vector<HashSet> sets;
  sets.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    HashSet h;
    h.owner = r.str(r.u32());
    const auto n = r.u32();
    if (static_cast<std::size_t>(n) * 8 > bytes.size() - r.pos) throw FormatError("fingerprint cache truncated");
    h.hashes.resize(n);
    for (auto& l : h.hashes) {
      l.key = r.u32();
      l.anchor_frame = r.u32();
    }
    sets.push_back(std::move(h));
  }
  if (r.pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes in fingerprint cache");
  return sets;
}

std::string format_matches_csv(std::span<const MatchScore> matches) {
  std::string out = "id_a,id_b,score,offset_frames\n";
  char buf[64];
  for (const auto& m : matches) {
    std::snprintf(buf, sizeof buf, "%.6f", m.score);
    out += csv::join({m.id_a, m.id_b, buf, std::to_string(m.offset_frames)});
    out += '\n';
  }
  return out;
}

}  // namespace caudit
