#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "tcd/signal.hpp"

using namespace tcd;

namespace {

Waveform silence(std::size_t n, int rate = 16000) { return {std::vector<double>(n, 0.0), rate}; }

}  // namespace

TEST_CASE("hann kernel tap count and shape") {
  const auto k = hann_kernel(8.0, 16000);
  REQUIRE(k.size() == 129);
  CHECK(k.center_index == 64);
  const auto ref = oracle::hann(129);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(k.weights[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  double total = 0.0;
  for (double w : k.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hann kernel degenerate windows") {
  const auto one = hann_kernel(0.01, 16000);
  REQUIRE(one.size() == 1);
  CHECK(one.weights[0] == 1.0);

  const auto three = hann_kernel_taps(3);
  REQUIRE(three.size() == 3);
  CHECK(three.weights[0] == 0.0);
  CHECK(three.weights[1] == 1.0);
  CHECK(three.weights[2] == 0.0);

  CHECK(hann_kernel_taps(4).size() == 5);
  CHECK_THROWS_AS(hann_kernel(0.0, 16000), std::invalid_argument);
  CHECK_THROWS_AS(hann_kernel(8.0, -1.0), std::invalid_argument);
}

TEST_CASE("blur of a constant is the constant") {
  Waveform x{std::vector<double>(2000, 0.37), 16000};
  const auto y = blur_waveform(x, 12.0);
  for (double v : y.samples) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("impulse blur matches direct convolution plus rescale") {
  auto x = silence(1001);
  x.samples[500] = 1.0;
  const auto y = blur_waveform(x, 8.0);
  auto ref = oracle::convolve(x.samples, oracle::hann(129));
  const double scale = oracle::rms(x.samples) / oracle::rms(ref);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] * scale - y.samples[i]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("blur without rescale is linear and rescale preserves rms") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 0.3);
  Waveform a = silence(800), b = silence(800), sum = silence(800);
  for (std::size_t i = 0; i < 800; ++i) {
    a.samples[i] = n(gen);
    b.samples[i] = n(gen);
    sum.samples[i] = 2.0 * a.samples[i] - 0.5 * b.samples[i];
  }
  const auto ya = blur_waveform(a, 5.0, false), yb = blur_waveform(b, 5.0, false);
  const auto ys = blur_waveform(sum, 5.0, false);
  for (std::size_t i = 0; i < 800; ++i)
    CHECK(ys.samples[i] == doctest::Approx(2.0 * ya.samples[i] - 0.5 * yb.samples[i]).epsilon(1e-12));

  const auto rescaled = blur_waveform(a, 5.0);
  CHECK(rms(rescaled.samples) == doctest::Approx(rms(a.samples)).epsilon(1e-12));
}

TEST_CASE("blur attenuates a transient click") {
  const int rate = 16000;
  Waveform x = silence(4096, rate);
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    x.samples[i] = 0.3 * std::sin(2 * M_PI * 220 * t) + 0.2 * std::sin(2 * M_PI * 440 * t);
  }
  // 5 ms click of alternating samples
  for (std::size_t i = 2000; i < 2080; ++i) x.samples[i] += (i % 2 ? 0.8 : -0.8);
  const auto y = blur_waveform(x, 10.0);
  const double before = oracle::band_energy_above(x.samples, rate, 2000.0);
  const double after = oracle::band_energy_above(y.samples, rate, 2000.0);
  CHECK(after < before);
  CHECK(after < 0.1 * before);
}

TEST_CASE("blur rejects empty input") {
  CHECK_THROWS_AS(blur_waveform(Waveform{{}, 16000}, 8.0), std::invalid_argument);
}

TEST_CASE("blur_states identity, constants and weighted-sum oracle") {
  const auto h = oracle::random_states(77, 3, 40, 6);
  const auto same = blur_states(h, 1);
  CHECK(same.layers == h.layers);

  EncoderStates flat;
  flat.layers.assign(2, FrameSequence(12, Frame{0.5, -1.0, 2.0}));
  const auto flat_out = blur_states(flat, 7);
  for (const auto& layer : flat_out.layers)
    for (const auto& f : layer) {
      CHECK(f[0] == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(f[1] == doctest::Approx(-1.0).epsilon(1e-12));
      CHECK(f[2] == doctest::Approx(2.0).epsilon(1e-12));
    }

  const auto out = blur_states(h, 5);
  double worst = 0.0;
  for (std::size_t l = 0; l < h.num_layers(); ++l) {
    const auto ref = oracle::blur_layer(h.layers[l], 5);
    for (std::size_t t = 0; t < ref.size(); ++t)
      for (std::size_t i = 0; i < ref[t].size(); ++i)
        worst = std::max(worst, std::abs(ref[t][i] - out.layers[l][t][i]));
  }
  CHECK(worst <= 1e-9);

  CHECK_THROWS_AS(blur_states(h, 81), std::invalid_argument);
  CHECK_NOTHROW(blur_states(h, 80));
  CHECK_THROWS_AS(blur_states(h, 0), std::invalid_argument);
}

TEST_CASE("noise reference") {
  Waveform x = silence(100000);
  for (std::size_t i = 0; i < x.samples.size(); ++i) x.samples[i] = std::sin(0.001 * static_cast<double>(i));

  CHECK(noise_reference(x, 0.0, 3).samples == x.samples);

  const auto a = noise_reference(x, 0.01, 42);
  const auto b = noise_reference(x, 0.01, 42);
  CHECK(a.samples == b.samples);
  CHECK(noise_reference(x, 0.01, 43).samples != a.samples);

  double mean = 0.0;
  for (std::size_t i = 0; i < x.samples.size(); ++i) mean += a.samples[i] - x.samples[i];
  mean /= static_cast<double>(x.samples.size());
  CHECK(std::abs(mean) <= 3.0 * 0.01 / std::sqrt(1e5));

  CHECK_THROWS_AS(noise_reference(x, -0.1, 0), std::invalid_argument);
}

TEST_CASE("synth: noise only, determinism, overlap rejection") {
  EventScript s;
  s.duration_ms = 500;
  s.noise_floor = 0.01;
  s.seed = 9;
  const auto a = synth_event_audio(s);
  CHECK(a.samples.size() == 8000);
  CHECK(rms(a.samples) == doctest::Approx(0.01).epsilon(0.05));
  CHECK(synth_event_audio(s).samples == a.samples);

  s.events = {{100, 80, "ring"}, {150, 80, "knock"}};
  CHECK_THROWS_AS(synth_event_audio(s), std::invalid_argument);
  s.events = {{100, 80, "gong"}};
  CHECK_THROWS_AS(synth_event_audio(s), std::invalid_argument);
}

TEST_CASE("synth: three rings give three energetic regions") {
  EventScript s;
  s.duration_ms = 1000;
  s.noise_floor = 0.01;
  s.seed = 4;
  s.events = {{100, 80, "ring"}, {400, 80, "ring"}, {700, 80, "ring"}};
  const auto x = synth_event_audio(s);

  // 10 ms short-time rms; count maximal runs above twice the noise floor
  const std::size_t hop = 160;
  int regions = 0;
  bool inside = false;
  for (std::size_t start = 0; start + hop <= x.samples.size(); start += hop) {
    std::vector<double> frame(x.samples.begin() + static_cast<long>(start),
                              x.samples.begin() + static_cast<long>(start + hop));
    const bool loud = oracle::rms(frame) > 2.0 * s.noise_floor;
    if (loud && !inside) ++regions;
    inside = loud;
  }
  CHECK(regions == 3);
}

TEST_CASE("event script text round trip") {
  EventScript s;
  s.duration_ms = 1500;
  s.noise_floor = 0.005;
  s.seed = 18446744073709551615ull;
  s.events = {{10, 40, "beep"}, {300, 60, "clap"}};
  const auto back = parse_event_script(format_event_script(s));
  CHECK(back.duration_ms == s.duration_ms);
  CHECK(back.noise_floor == s.noise_floor);
  CHECK(back.seed == s.seed);
  REQUIRE(back.events.size() == 2);
  CHECK(back.events[1].event_class == "clap");
  CHECK(back.events[1].onset_ms == 300);
  CHECK_THROWS(parse_event_script("duration_ms=100\n10,20\n"));
}

TEST_CASE("wav round trip") {
  EventScript s;
  s.duration_ms = 200;
  s.events = {{20, 50, "beep"}};
  const auto x = synth_event_audio(s);
  const auto bytes = encode_wav(x);
  CHECK(bytes.size() == 44 + 2 * x.samples.size());
  const auto y = decode_wav(bytes);
  CHECK(y.sample_rate == 16000);
  REQUIRE(y.samples.size() == x.samples.size());
  for (std::size_t i = 0; i < x.samples.size(); ++i) CHECK(std::abs(y.samples[i] - x.samples[i]) <= 1.0 / 32767);
  // quantized signal is a fixed point
  CHECK(decode_wav(encode_wav(y)).samples == y.samples);

  const auto path = std::filesystem::temp_directory_path() / "tcd_test_roundtrip.wav";
  write_wav(path.string(), y);
  CHECK(read_wav(path.string()).samples == y.samples);
  std::filesystem::remove(path);

  std::vector<std::uint8_t> junk(10, 0);
  CHECK_THROWS(decode_wav(junk));
}
