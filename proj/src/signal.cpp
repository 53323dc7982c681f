#include "tcd/signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "tcd/rng.hpp"

namespace tcd {

namespace {

constexpr double kEventAmplitude = 0.5;
constexpr double kRampMs = 5.0;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("event script: bad number for " + std::string(what) + ": '" +
                                std::string(s) + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  s = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("event script: bad integer for " + std::string(what) + ": '" +
                                std::string(s) + "'");
  return v;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void Waveform::validate() const {
  if (samples.empty()) throw std::invalid_argument("waveform: no samples");
  if (sample_rate <= 0) throw std::invalid_argument("waveform: sample_rate must be > 0");
  for (double v : samples)
    if (!std::isfinite(v)) throw std::invalid_argument("waveform: non-finite sample");
}

BlurKernel hann_kernel_taps(std::size_t taps) {
  if (taps == 0) throw std::invalid_argument("hann kernel: need at least one tap");
  if (taps % 2 == 0) ++taps;
  BlurKernel kernel;
  kernel.center_index = taps / 2;
  if (taps == 1) {
    kernel.weights = {1.0};
    return kernel;
  }
  kernel.weights.resize(taps);
  const double denom = static_cast<double>(taps - 1);
  double total = 0.0;
  for (std::size_t k = 0; k < taps; ++k) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom));
    kernel.weights[k] = w;
    total += w;
  }
  for (std::size_t k = 0; k < taps; ++k) kernel.weights[k] /= total;
  // mirror so symmetry is exact rather than accurate to rounding
  for (std::size_t k = 0; k < kernel.center_index; ++k)
    kernel.weights[taps - 1 - k] = kernel.weights[k];
  return kernel;
}

BlurKernel hann_kernel(double window_ms, double sample_rate) {
  if (!(window_ms > 0.0) || !std::isfinite(window_ms))
    throw std::invalid_argument("hann kernel: window_ms must be > 0");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw std::invalid_argument("hann kernel: sample_rate must be > 0");
  const double span = window_ms * sample_rate / 1000.0;
  auto taps = static_cast<std::size_t>(std::max(1.0, std::ceil(span - 1e-9)));
  return hann_kernel_taps(taps);
}

std::vector<double> convolve_normalized(std::span<const double> x, const BlurKernel& kernel) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto taps = static_cast<std::ptrdiff_t>(kernel.size());
  const auto center = static_cast<std::ptrdiff_t>(kernel.center_index);
  std::vector<double> y(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, center - i);
    const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(taps, n - i + center);
    double acc = 0.0;
    double mass = 0.0;
    for (std::ptrdiff_t k = k_lo; k < k_hi; ++k) {
      const double w = kernel.weights[static_cast<std::size_t>(k)];
      acc += w * x[static_cast<std::size_t>(i + k - center)];
      mass += w;
    }
    y[static_cast<std::size_t>(i)] = acc / mass;
  }
  return y;
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

Waveform blur_waveform(const Waveform& x, double window_ms, bool rescale) {
  x.validate();
  const BlurKernel kernel = hann_kernel(window_ms, x.sample_rate);
  Waveform out{convolve_normalized(x.samples, kernel), x.sample_rate};
  if (rescale) {
    const double target = rms(x.samples);
    const double current = rms(out.samples);
    if (target > 0.0 && current > 0.0) {
      const double gain = target / current;
      for (double& v : out.samples) v *= gain;
    }
  }
  return out;
}

EncoderStates blur_states(const EncoderStates& states, std::size_t window_frames) {
  states.validate();
  const std::size_t frames = states.num_frames();
  if (window_frames == 0) throw std::invalid_argument("blur_states: window_frames must be >= 1");
  if (window_frames > 2 * frames)
    throw std::invalid_argument("blur_states: window larger than twice the sequence length");
  const BlurKernel kernel = hann_kernel_taps(window_frames);
  const auto n = static_cast<std::ptrdiff_t>(frames);
  const auto center = static_cast<std::ptrdiff_t>(kernel.center_index);
  const auto taps = static_cast<std::ptrdiff_t>(kernel.size());

  EncoderStates out = states;
  for (std::size_t l = 0; l < states.num_layers(); ++l) {
    const auto& src = states.layers[l];
    auto& dst = out.layers[l];
    for (std::ptrdiff_t t = 0; t < n; ++t) {
      const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, center - t);
      const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(taps, n - t + center);
      double mass = 0.0;
      for (std::ptrdiff_t k = k_lo; k < k_hi; ++k) mass += kernel.weights[static_cast<std::size_t>(k)];
      Frame acc(states.dim(), 0.0);
      for (std::ptrdiff_t k = k_lo; k < k_hi; ++k) {
        const double w = kernel.weights[static_cast<std::size_t>(k)] / mass;
        const auto& h = src[static_cast<std::size_t>(t + k - center)];
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * h[i];
      }
      dst[static_cast<std::size_t>(t)] = std::move(acc);
    }
  }
  return out;
}

Waveform noise_reference(const Waveform& x, double sigma, std::uint64_t seed) {
  x.validate();
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("noise_reference: sigma must be >= 0");
  Waveform out = x;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (double& v : out.samples) v += sigma * rng.normal();
  return out;
}

const std::vector<std::string>& event_classes() {
  static const std::vector<std::string> classes = {"ring", "knock", "beep", "clap", "chirp"};
  return classes;
}

double event_class_frequency(std::string_view event_class) {
  if (event_class == "ring") return 1200.0;
  if (event_class == "knock") return 250.0;
  if (event_class == "beep") return 2000.0;
  if (event_class == "clap") return 3200.0;
  if (event_class == "chirp") return 4500.0;
  throw std::invalid_argument("unknown event class '" + std::string(event_class) + "'");
}

void EventScript::validate() const {
  if (!(duration_ms > 0.0)) throw std::invalid_argument("event script: duration_ms must be > 0");
  if (!(noise_floor >= 0.0)) throw std::invalid_argument("event script: noise_floor must be >= 0");
  if (sample_rate <= 0) throw std::invalid_argument("event script: sample_rate must be > 0");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    event_class_frequency(e.event_class);
    if (!(e.onset_ms >= 0.0) || !(e.length_ms > 0.0))
      throw std::invalid_argument("event script: event " + std::to_string(i) +
                                  " needs onset >= 0 and length > 0");
    if (e.onset_ms + e.length_ms > duration_ms)
      throw std::invalid_argument("event script: event " + std::to_string(i) +
                                  " extends past the clip");
    if (i > 0) {
      const auto& prev = events[i - 1];
      if (!(e.onset_ms > prev.onset_ms))
        throw std::invalid_argument("event script: onsets must be strictly increasing");
      if (e.onset_ms < prev.onset_ms + prev.length_ms)
        throw std::invalid_argument("event script: event " + std::to_string(i) +
                                    " overlaps the previous event");
    }
  }
}

Waveform synth_event_audio(const EventScript& script) {
  script.validate();
  const double rate = script.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(script.duration_ms * rate / 1000.0));
  if (n == 0) throw std::invalid_argument("event script: clip shorter than one sample");
  Waveform out{std::vector<double>(n, 0.0), script.sample_rate};

  if (script.noise_floor > 0.0) {
    Rng rng(script.seed);
    for (double& v : out.samples) v = script.noise_floor * rng.normal();
  }

  for (const auto& e : script.events) {
    const double freq = event_class_frequency(e.event_class);
    const auto begin = static_cast<std::size_t>(std::llround(e.onset_ms * rate / 1000.0));
    const auto len = static_cast<std::size_t>(std::llround(e.length_ms * rate / 1000.0));
    const double ramp = std::min(kRampMs * rate / 1000.0, 0.5 * static_cast<double>(len));
    for (std::size_t k = 0; k < len && begin + k < n; ++k) {
      const double t = static_cast<double>(k);
      double envelope = 1.0;
      const double from_end = static_cast<double>(len - 1 - k);
      if (ramp > 0.0 && t < ramp) envelope = 0.5 * (1.0 - std::cos(std::numbers::pi * t / ramp));
      if (ramp > 0.0 && from_end < ramp)
        envelope = std::min(envelope, 0.5 * (1.0 - std::cos(std::numbers::pi * from_end / ramp)));
      out.samples[begin + k] +=
          kEventAmplitude * envelope * std::sin(2.0 * std::numbers::pi * freq * t / rate);
    }
  }
  return out;
}

EventScript parse_event_script(std::string_view text) {
  EventScript script;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    if (const auto eq = line.find('='); eq != std::string_view::npos) {
      const auto key = trim(line.substr(0, eq));
      const auto value = line.substr(eq + 1);
      if (key == "duration_ms") {
        script.duration_ms = parse_double(value, key);
      } else if (key == "noise_floor") {
        script.noise_floor = parse_double(value, key);
      } else if (key == "seed") {
        script.seed = parse_u64(value, key);
      } else if (key == "sample_rate") {
        script.sample_rate = static_cast<int>(parse_u64(value, key));
      } else {
        throw std::invalid_argument("event script line " + std::to_string(line_no) +
                                    ": unknown key '" + std::string(key) + "'");
      }
      continue;
    }

    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos)
      throw std::invalid_argument("event script line " + std::to_string(line_no) +
                                  ": expected onset_ms,length_ms,class");
    AudioEvent e;
    e.onset_ms = parse_double(line.substr(0, c1), "onset_ms");
    e.length_ms = parse_double(line.substr(c1 + 1, c2 - c1 - 1), "length_ms");
    e.event_class = std::string(trim(line.substr(c2 + 1)));
    script.events.push_back(std::move(e));
  }
  script.validate();
  return script;
}

std::string format_event_script(const EventScript& script) {
  std::ostringstream os;
  os << "duration_ms=" << format_number(script.duration_ms) << '\n'
     << "noise_floor=" << format_number(script.noise_floor) << '\n'
     << "seed=" << script.seed << '\n'
     << "sample_rate=" << script.sample_rate << '\n';
  for (const auto& e : script.events)
    os << format_number(e.onset_ms) << ',' << format_number(e.length_ms) << ',' << e.event_class
       << '\n';
  return os.str();
}

EventScript load_event_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open event script '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_event_script(buf.str());
}

}  // namespace tcd
