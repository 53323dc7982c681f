#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tcd/encoder_states.hpp"

namespace tcd {

/// Mono audio. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_ms() const {
    return 1000.0 * static_cast<double>(samples.size()) / sample_rate;
  }
  /// Throws std::invalid_argument on empty samples, non-positive rate or
  /// non-finite values.
  void validate() const;
};

/// Normalized, symmetric, non-negative smoothing kernel.
struct BlurKernel {
  std::vector<double> weights;
  std::size_t center_index = 0;

  std::size_t size() const { return weights.size(); }
};

struct AudioEvent {
  double onset_ms = 0.0;
  double length_ms = 0.0;
  std::string event_class;
};

/// Deterministic description of a test clip: tone bursts over seeded noise.
struct EventScript {
  double duration_ms = 1000.0;
  std::vector<AudioEvent> events;
  double noise_floor = 0.0;
  std::uint64_t seed = 0;
  int sample_rate = 16000;

  void validate() const;
};

/// Hann window of odd length covering `window_ms` at `sample_rate`,
/// renormalized to sum to one. Zero-endpoint convention, so a 3-tap kernel
/// is (0, 1, 0); anything shorter than 2 samples is the single tap [1].
BlurKernel hann_kernel(double window_ms, double sample_rate);

/// Hann kernel with an explicit tap count (even counts round up to odd).
BlurKernel hann_kernel_taps(std::size_t taps);

/// Convolve with `kernel`; near the edges only in-range taps are used and
/// renormalized, so constants are fixed points.
std::vector<double> convolve_normalized(std::span<const double> x, const BlurKernel& kernel);

double rms(std::span<const double> x);

/// Temporally blurred slow-path view of `x`. With `rescale` on, the result is
/// scaled so its RMS matches the input's (silent input is left as is).
Waveform blur_waveform(const Waveform& x, double window_ms, bool rescale = true);

/// Hann-weighted local average over encoder frames in every layer.
/// Throws if window_frames is 0 or exceeds twice the sequence length.
EncoderStates blur_states(const EncoderStates& states, std::size_t window_frames);

/// `x` plus seeded N(0, sigma^2) noise.
Waveform noise_reference(const Waveform& x, double sigma, std::uint64_t seed);

/// Center frequency of the tone burst used for each event class.
double event_class_frequency(std::string_view event_class);
const std::vector<std::string>& event_classes();

Waveform synth_event_audio(const EventScript& script);

// Line-delimited text form of an EventScript. Header lines are key=value
// (duration_ms, noise_floor, seed, sample_rate); every other non-comment line
// is "onset_ms,length_ms,class".
EventScript parse_event_script(std::string_view text);
std::string format_event_script(const EventScript& script);
EventScript load_event_script(const std::string& path);

// 16-bit PCM mono RIFF/WAVE, little-endian.
Waveform read_wav(const std::string& path);
Waveform decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const Waveform& x);
void write_wav(const std::string& path, const Waveform& x);

}  // namespace tcd
