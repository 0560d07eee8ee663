#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace caudit {

// Frame grid shared by the fingerprint and feature paths.
struct FrameGrid {
  std::size_t frame_size = 1024;
  std::size_t hop = 512;

  // floor((n - frame) / hop) + 1, or 0 when n < frame.
  std::size_t count(std::size_t n) const { return n < frame_size ? 0 : (n - frame_size) / hop + 1; }
};

std::vector<double> hann_window(std::size_t n);

// Row-major magnitude spectrogram: frames() rows of bins() = frame/2 + 1.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t frames, std::size_t bins) : frames_(frames), bins_(bins), mag_(frames * bins) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  double& at(std::size_t f, std::size_t k) { return mag_[f * bins_ + k]; }
  double at(std::size_t f, std::size_t k) const { return mag_[f * bins_ + k]; }
  std::span<const double> frame(std::size_t f) const { return {mag_.data() + f * bins_, bins_}; }
  std::span<const double> data() const { return mag_; }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::vector<double> mag_;
};

// Hann-windowed magnitude STFT. Throws TooShortError when the buffer is
// shorter than one frame. frame_size must be even.
Spectrogram magnitude_stft(std::span<const float> samples, const FrameGrid& grid);

// Magnitude spectrum of one already-windowed frame (length = frame size).
std::vector<double> magnitude_spectrum(std::span<const double> windowed);

}  // namespace caudit
