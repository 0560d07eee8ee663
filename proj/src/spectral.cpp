#include "caudit/spectral.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "caudit/errors.hpp"

namespace caudit {

namespace {

// FFTW planning is not thread-safe; executing an existing plan on new arrays
// is. Plans are cached per size and never destroyed.
fftw_plan plan_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(n, p);
  return p;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

class Transform {
 public:
  explicit Transform(std::size_t n)
      : n_(n),
        plan_(plan_for(n)),
        in_(fftw_alloc_real(n)),
        out_(fftw_alloc_complex(n / 2 + 1)) {}

  double* input() { return in_.get(); }

  void magnitudes(std::span<double> dst) {
    fftw_execute_dft_r2c(plan_, in_.get(), out_.get());
    for (std::size_t k = 0; k <= n_ / 2; ++k) dst[k] = std::hypot(out_.get()[k][0], out_.get()[k][1]);
  }

 private:
  std::size_t n_;
  fftw_plan plan_;
  std::unique_ptr<double, FftwDeleter> in_;
  std::unique_ptr<fftw_complex, FftwDeleter> out_;
};

}  // namespace

std::vector<double> hann_window(std::size_t n) {
  // Periodic Hann, the usual choice for STFT analysis.
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Spectrogram magnitude_stft(std::span<const float> samples, const FrameGrid& grid) {
  const std::size_t frames = grid.count(samples.size());
  if (frames == 0)
    throw TooShortError("buffer of " + std::to_string(samples.size()) + " samples is shorter than one " +
                        std::to_string(grid.frame_size) + "-sample frame");
  const auto window = hann_window(grid.frame_size);
  Spectrogram spec(frames, grid.frame_size / 2 + 1);
  Transform fft(grid.frame_size);
  std::vector<double> mags(spec.bins());
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * grid.hop;
    double* in = fft.input();
    for (std::size_t i = 0; i < grid.frame_size; ++i) in[i] = window[i] * samples[start + i];
    fft.magnitudes(mags);
    for (std::size_t k = 0; k < spec.bins(); ++k) spec.at(f, k) = mags[k];
  }
  return spec;
}

std::vector<double> magnitude_spectrum(std::span<const double> windowed) {
  Transform fft(windowed.size());
  std::copy(windowed.begin(), windowed.end(), fft.input());
  std::vector<double> mags(windowed.size() / 2 + 1);
  fft.magnitudes(mags);
  return mags;
}

}  // namespace caudit
