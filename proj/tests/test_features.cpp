#include <cmath>
#include <random>

#include "doctest.h"

#include "caudit/errors.hpp"
#include "caudit/features.hpp"
#include "caudit/spectral.hpp"
#include "support/synth.hpp"

using namespace caudit;
using namespace caudit::testing;

namespace {

constexpr double kRate = 22050.0;

std::vector<FrameFeatures> random_frames(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<FrameFeatures> f(n);
  for (auto& x : f) {
    for (auto& m : x.mfcc) m = g(rng);
    x.zcr = std::abs(g(rng)) * 50;
    x.centroid = 1000 + 100 * g(rng);
    x.rolloff = 4000 + 300 * g(rng);
  }
  return f;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("framing arithmetic on a 30 s buffer") {
    const auto x = seeded_noise(1, 661500, 0.3f);
    const auto frames = frame_features(x, kRate);
    CHECK(frames.size() == 1290);
    const auto tv = texture_vectors(frames);
    CHECK(tv.size() == 9);
    for (const auto& v : tv) {
      CHECK(v.size() == 32);
      for (std::size_t d = 16; d < 32; ++d) CHECK(v[d] >= 0.0);
    }
    CHECK(frame_features(std::vector<float>(2047, 0.1f), kRate).size() == 2);
  }

  TEST_CASE("short inputs") {
    CHECK_THROWS_AS(frame_features(std::vector<float>(1023, 0.1f), kRate), TooShortError);
    CHECK_THROWS_AS(texture_vectors(random_frames(1, 129)), TooShortError);
  }

  TEST_CASE("constant positive signal has no zero crossings") {
    for (const auto& f : frame_features(std::vector<float>(8192, 0.25f), kRate)) CHECK(f.zcr == 0.0);
  }

  TEST_CASE("zero crossings of an alternating signal") {
    std::vector<float> x(4096);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2) ? 0.5f : -0.5f;
    for (const auto& f : frame_features(x, kRate)) CHECK(f.zcr == 1023.0);
  }

  TEST_CASE("centroid of a 1 kHz tone lies within one bin") {
    const auto frames = frame_features(sinusoid(1000.0, kRate, 22050), kRate);
    const double bin = kRate / 1024.0;
    for (const auto& f : frames) {
      CHECK(std::abs(f.centroid - 1000.0) <= bin);
      CHECK(f.rolloff >= 0.0);
      CHECK(f.rolloff <= kRate / 2);
    }
  }

  TEST_CASE("rolloff is the smallest bin reaching 85% of the magnitude") {
    const auto x = synthetic_music(3, 2.0);
    const auto frames = frame_features(x, kRate);
    const auto spec = magnitude_stft(x, FrameGrid{});
    const double bin = kRate / 1024.0;
    for (std::size_t f = 0; f < frames.size(); f += 7) {
      const auto mag = spec.frame(f);
      double total = 0.0;
      for (double m : mag) total += m;
      const auto r = static_cast<std::size_t>(std::lround(frames[f].rolloff / bin));
      double upto = 0.0;
      for (std::size_t k = 0; k <= r; ++k) upto += mag[k];
      CHECK(upto >= 0.85 * total);
      CHECK(upto - mag[r] < 0.85 * total);
      CHECK(frames[f].centroid >= 0.0);
      CHECK(frames[f].centroid <= kRate / 2);
    }
  }

  TEST_CASE("doubling the amplitude moves only the first cepstral coefficient") {
    auto x = synthetic_music(4, 3.0);
    auto y = x;
    for (auto& v : y) v *= 2.0f;
    const auto a = frame_features(x, kRate), b = frame_features(y, kRate);
    for (std::size_t f = 0; f < a.size(); ++f) {
      CHECK(b[f].mfcc[0] - a[f].mfcc[0] == doctest::Approx(std::log10(2.0) * std::sqrt(40.0)).epsilon(1e-6));
      for (std::size_t c = 1; c < kMfccCount; ++c) CHECK(std::abs(b[f].mfcc[c] - a[f].mfcc[c]) < 1e-6);
    }
  }

  TEST_CASE("mel filterbank layout") {
    const auto bank = mel_filterbank(1024, kRate);
    REQUIRE(bank.size() == 40);
    const double bin = kRate / 1024.0;
    auto first_bin = [](const std::vector<double>& row) {
      std::size_t k = 0;
      while (row[k] == 0.0) ++k;
      return k;
    };
    CHECK(double(first_bin(bank[0])) * bin > 133.3);
    CHECK(double(first_bin(bank[0]) - 1) * bin <= 133.4);
    std::size_t last = 0;
    for (std::size_t k = 0; k < bank[39].size(); ++k)
      if (bank[39][k] > 0.0) last = k;
    CHECK(double(last) * bin < 6854.0 + 1.0);
    CHECK(double(last + 1) * bin > 6854.0 - 1.0);
    // wide filters integrate to about one
    double area = 0.0;
    for (double w : bank[39]) area += w * bin;
    CHECK(area == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("texture statistics match a direct oracle") {
    const auto frames = random_frames(9, 260);
    const auto tv = texture_vectors(frames);
    REQUIRE(tv.size() == 2);
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t d = 0; d < kFrameDims; ++d) {
        long double s = 0, ss = 0;
        for (std::size_t i = 0; i < 130; ++i) {
          const long double x = frames[b * 130 + i].values()[d];
          s += x;
          ss += x * x;
        }
        const long double mean = s / 130;
        const long double var = (ss - 130 * mean * mean) / 129;
        CHECK(tv[b][d] == doctest::Approx(double(mean)).epsilon(1e-9));
        CHECK(tv[b][kFrameDims + d] == doctest::Approx(double(var)).epsilon(1e-9));
      }
    }
    const std::vector<FrameFeatures> same(130, frames[0]);
    const auto flat = texture_vectors(same)[0];
    for (std::size_t d = 0; d < kFrameDims; ++d) CHECK(std::abs(flat[kFrameDims + d]) <= 1e-20 * (1 + flat[d] * flat[d]));
  }

  TEST_CASE("identical audio gives bit-identical features") {
    const auto x = synthetic_music(5, 4.0);
    const auto a = excerpt_features(x, kRate, {.texture_frames = 50});
    const auto b = excerpt_features(x, kRate, {.texture_frames = 50});
    CHECK(a == b);
  }

  TEST_CASE("normalization map") {
    std::vector<FeatureVector> train{{0.0, 5.0, 1.0}, {2.0, 5.0, 3.0}};
    const auto map = fit_normalization(train);
    CHECK(map.degenerate == std::vector<std::size_t>{1});
    const auto out = apply_normalization(map, train);
    for (const auto& v : out)
      for (double x : v) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
      }
    CHECK(map.apply({1.0, 5.0, 2.0}) == FeatureVector{0.5, 0.0, 0.5});
    CHECK(map.apply({3.0, 9.0, 1.0})[0] == 1.5);
    CHECK_THROWS_AS(fit_normalization({}), Error);
    CHECK_THROWS_AS(map.apply({1.0}), Error);
  }

  TEST_CASE("feature csv round trip") {
    FeatureTable t;
    t["a"] = {{0.1, 1e-300, -3.25}, {std::nextafter(1.0, 2.0), 0.0, 7.0}};
    t["b,c"] = {{1.0, 2.0, 3.0}};
    const auto back = parse_features_csv(format_features_csv(t));
    CHECK(back == t);
    CHECK_THROWS_AS(parse_features_csv("id,window_index,f0\na,1,0.5\n"), ParseError);
    CHECK_THROWS_AS(parse_features_csv("id,window_index,f0\na,0,zero\n"), ParseError);
  }
}
