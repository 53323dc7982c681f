#include "tcd/toy_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "tcd/rng.hpp"

namespace tcd {

namespace {

constexpr char kMagic[8] = {'T', 'C', 'D', 'T', 'O', 'Y', 'M', 'D'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr double kBands[4] = {250.0, 1200.0, 2000.0, 3200.0};

Dense shaped(std::size_t out, std::size_t in, bool with_bias) {
  Dense d;
  d.out = out;
  d.in = in;
  d.weight.assign(out * in, 0.0);
  if (with_bias) d.bias.assign(out, 0.0);
  return d;
}

ToyWeights shaped_weights(const ToyModelConfig& c) {
  ToyWeights w;
  for (std::size_t l = 0; l < c.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? ToyModel::kFeatures : c.d_model;
    w.encoder.push_back({shaped(c.d_model, in, true), shaped(c.d_model, in, false)});
  }
  w.adapter = shaped(c.d_model, c.d_model, true);
  w.audio_segment.assign(c.d_model, 0.0);
  w.text_segment.assign(c.d_model, 0.0);
  w.embedding.assign(c.vocab * c.d_model, 0.0);
  for (std::size_t l = 0; l < c.decoder_layers; ++l) {
    ToyDecoderLayer layer;
    layer.query = shaped(c.d_model, c.d_model, true);
    layer.key = shaped(c.d_model, c.d_model, true);
    layer.value = shaped(c.d_model, c.d_model, true);
    layer.output = shaped(c.d_model, c.d_model, true);
    layer.ff_in = shaped(c.d_ff, c.d_model, true);
    layer.ff_out = shaped(c.d_model, c.d_ff, true);
    w.decoder.push_back(std::move(layer));
  }
  w.unembed = shaped(c.vocab, c.d_model, false);
  return w;
}

// Visits every parameter tensor in serialization order, with the standard
// deviation used for random initialization.
void for_each_tensor(ToyWeights& w, const std::function<void(std::vector<double>&, double)>& fn) {
  auto dense = [&](Dense& d, double gain, double bias_std) {
    fn(d.weight, gain / std::sqrt(static_cast<double>(d.in)));
    if (!d.bias.empty()) fn(d.bias, bias_std);
  };
  for (auto& layer : w.encoder) {
    dense(layer.current, 1.5, 0.3);
    dense(layer.previous, 0.8, 0.0);
  }
  dense(w.adapter, 1.0, 0.1);
  fn(w.audio_segment, 0.5);
  fn(w.text_segment, 0.5);
  fn(w.embedding, 1.0);
  for (auto& layer : w.decoder) {
    dense(layer.query, 1.5, 0.1);
    dense(layer.key, 1.5, 0.1);
    dense(layer.value, 1.0, 0.1);
    dense(layer.output, 1.0, 0.05);
    dense(layer.ff_in, 1.0, 0.1);
    dense(layer.ff_out, 1.0, 0.05);
  }
  dense(w.unembed, 2.5, 0.0);
}

void check_config(const ToyModelConfig& c) {
  if (c.encoder_layers == 0 || c.decoder_layers == 0)
    throw std::invalid_argument("toy model: need at least one encoder and one decoder layer");
  if (c.d_model == 0 || c.heads == 0 || c.d_model % c.heads != 0)
    throw std::invalid_argument("toy model: d_model must be a positive multiple of heads");
  if (c.d_ff == 0 || c.vocab == 0) throw std::invalid_argument("toy model: empty d_ff or vocab");
  if (!(c.frame_rate > 0.0)) throw std::invalid_argument("toy model: frame_rate must be > 0");
}

bool same_shapes(ToyWeights& a, ToyWeights& b) {
  std::vector<std::size_t> sa, sb;
  for_each_tensor(a, [&](std::vector<double>& t, double) { sa.push_back(t.size()); });
  for_each_tensor(b, [&](std::vector<double>& t, double) { sb.push_back(t.size()); });
  return sa == sb;
}

std::vector<double> layer_norm(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) * inv;
  return y;
}

double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); }

void add_positional(std::vector<double>& x, std::size_t position) {
  const std::size_t d = x.size();
  for (std::size_t i = 0; i + 1 < d; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
    x[i] += 0.5 * std::sin(static_cast<double>(position) * freq);
    x[i + 1] += 0.5 * std::cos(static_cast<double>(position) * freq);
  }
}

double goertzel_magnitude(std::span<const double> frame, double freq, double rate) {
  if (freq >= 0.5 * rate) return 0.0;
  const double omega = 2.0 * std::numbers::pi * freq / rate;
  const double coeff = 2.0 * std::cos(omega);
  double s1 = 0.0, s2 = 0.0;
  for (double v : frame) {
    const double s0 = v + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  const double power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
  return 2.0 * std::sqrt(std::max(power, 0.0)) / static_cast<double>(frame.size());
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint64_t u(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
      throw std::invalid_argument("toy model fixture: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::invalid_argument("toy model fixture: truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> Dense::apply(std::span<const double> x) const {
  std::vector<double> y(out);
  for (std::size_t r = 0; r < out; ++r) {
    double acc = bias.empty() ? 0.0 : bias[r];
    const double* row = weight.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

ToyWeights make_toy_weights(const ToyModelConfig& config) {
  check_config(config);
  ToyWeights w = shaped_weights(config);
  Rng rng(config.seed);
  for_each_tensor(w, [&](std::vector<double>& t, double stddev) {
    for (double& v : t) v = stddev * rng.normal();
  });
  return w;
}

ToyModel::ToyModel(ToyModelConfig config) : ToyModel(config, make_toy_weights(config)) {}

ToyModel::ToyModel(ToyModelConfig config, ToyWeights weights)
    : config_(config), weights_(std::move(weights)) {
  check_config(config_);
  ToyWeights expected = shaped_weights(config_);
  if (!same_shapes(expected, weights_))
    throw std::invalid_argument("toy model: weight shapes do not match the config");
}

// ---------------------------------------------------------------- encoder

std::vector<std::vector<double>> ToyModel::frame_features(const Waveform& x) const {
  x.validate();
  const auto frame_len =
      static_cast<std::size_t>(std::llround(x.sample_rate / config_.frame_rate));
  if (frame_len == 0 || x.samples.size() < frame_len)
    throw std::invalid_argument("toy model: waveform shorter than one frame");
  const std::size_t frames = x.samples.size() / frame_len;
  const double rate = x.sample_rate;

  std::vector<std::vector<double>> features(frames, std::vector<double>(kFeatures, 0.0));
  for (std::size_t t = 0; t < frames; ++t) {
    std::span<const double> frame(x.samples.data() + t * frame_len, frame_len);
    double energy = 0.0, peak = 0.0, slope = 0.0;
    std::size_t crossings = 0;
    for (std::size_t i = 0; i < frame.size(); ++i) {
      energy += frame[i] * frame[i];
      peak = std::max(peak, std::abs(frame[i]));
      if (i > 0) {
        slope += std::abs(frame[i] - frame[i - 1]);
        if ((frame[i] >= 0.0) != (frame[i - 1] >= 0.0)) ++crossings;
      }
    }
    const double n = static_cast<double>(frame.size());
    auto& f = features[t];
    f[0] = 4.0 * std::sqrt(energy / n);
    f[1] = 2.0 * peak;
    f[2] = 8.0 * slope / std::max(1.0, n - 1.0);
    f[3] = 4.0 * static_cast<double>(crossings) / std::max(1.0, n - 1.0);
    for (std::size_t b = 0; b < 4; ++b) f[4 + b] = 4.0 * goertzel_magnitude(frame, kBands[b], rate);
  }
  return features;
}

EncoderStates ToyModel::encode_features(const std::vector<std::vector<double>>& features) const {
  if (features.empty()) throw std::invalid_argument("toy model: no frames to encode");
  EncoderStates states;
  states.frame_rate = config_.frame_rate;
  std::vector<std::vector<double>> input = features;
  for (const auto& layer : weights_.encoder) {
    FrameSequence seq;
    seq.reserve(input.size());
    std::vector<double> zero(layer.previous.in, 0.0);
    for (std::size_t t = 0; t < input.size(); ++t) {
      auto y = layer.current.apply(input[t]);
      const auto p = layer.previous.apply(t == 0 ? std::span<const double>(zero)
                                                 : std::span<const double>(input[t - 1]));
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i] + p[i]);
      seq.push_back(std::move(y));
    }
    input = seq;
    states.layers.push_back(std::move(seq));
  }
  return states;
}

EncoderStates ToyModel::do_encode(const Waveform& x) const {
  return encode_features(frame_features(x));
}

// ---------------------------------------------------------------- decoder

struct ToyModel::KvCache final : CacheState {
  std::size_t audio_positions = 0;
  // keys[layer][position] and values[layer][position], each d_model wide
  std::vector<std::vector<std::vector<double>>> keys;
  std::vector<std::vector<std::vector<double>>> values;

  std::size_t bytes() const override {
    std::size_t total = 0;
    for (const auto& layer : keys)
      for (const auto& k : layer) total += k.size() * sizeof(double);
    for (const auto& layer : values)
      for (const auto& v : layer) total += v.size() * sizeof(double);
    return total;
  }
};

std::vector<std::vector<double>> ToyModel::audio_inputs(const EncoderStates& states) const {
  if (states.dim() != config_.d_model)
    throw std::invalid_argument("toy model: encoder state dimension does not match d_model");
  std::vector<std::vector<double>> inputs;
  const auto& top = states.layers.back();
  for (std::size_t t = 0; t < top.size(); ++t) {
    auto a = weights_.adapter.apply(top[t]);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += weights_.audio_segment[i];
    add_positional(a, t);
    inputs.push_back(std::move(a));
  }
  return inputs;
}

std::vector<double> ToyModel::text_input(TokenId token, std::size_t position) const {
  const std::size_t d = config_.d_model;
  std::vector<double> x(weights_.embedding.begin() + static_cast<std::ptrdiff_t>(token * d),
                        weights_.embedding.begin() + static_cast<std::ptrdiff_t>((token + 1) * d));
  for (std::size_t i = 0; i < d; ++i) x[i] += weights_.text_segment[i];
  add_positional(x, position);
  return x;
}

StepOutput ToyModel::advance(KvCache& cache, std::vector<double> x, bool is_audio) const {
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  StepOutput out;
  out.attn_audio_ratio_per_layer.assign(config_.decoder_layers, 0.0);

  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const auto& layer = weights_.decoder[l];
    const auto normed = layer_norm(x);
    const auto q = layer.query.apply(normed);
    cache.keys[l].push_back(layer.key.apply(normed));
    cache.values[l].push_back(layer.value.apply(normed));
    const auto& keys = cache.keys[l];
    const auto& values = cache.values[l];
    const std::size_t positions = keys.size();
    const bool block_audio = config_.mask_audio && !is_audio;

    std::vector<double> context(d, 0.0);
    double audio_mass = 0.0;
    std::vector<double> scores(positions);
    for (std::size_t h = 0; h < heads; ++h) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < positions; ++p) {
        if (block_audio && p < cache.audio_positions) {
          scores[p] = -std::numeric_limits<double>::infinity();
          continue;
        }
        double s = 0.0;
        for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) s += q[i] * keys[p][i];
        scores[p] = s * scale;
        best = std::max(best, scores[p]);
      }
      double total = 0.0;
      for (std::size_t p = 0; p < positions; ++p) {
        scores[p] = std::isinf(scores[p]) ? 0.0 : std::exp(scores[p] - best);
        total += scores[p];
      }
      for (std::size_t p = 0; p < positions; ++p) {
        const double a = scores[p] / total;
        if (p < cache.audio_positions) audio_mass += a;
        for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) context[i] += a * values[p][i];
      }
    }
    out.attn_audio_ratio_per_layer[l] =
        std::clamp(audio_mass / static_cast<double>(heads), 0.0, 1.0);

    const auto projected = layer.output.apply(context);
    for (std::size_t i = 0; i < d; ++i) x[i] += projected[i];
    auto hidden = layer.ff_in.apply(layer_norm(x));
    for (double& v : hidden) v = gelu(v);
    const auto ff = layer.ff_out.apply(hidden);
    for (std::size_t i = 0; i < d; ++i) x[i] += ff[i];
  }
  out.logits = weights_.unembed.apply(layer_norm(x));
  return out;
}

ToyModel::PrefillResult ToyModel::do_prefill(const EncoderStates& states,
                                             std::span<const TokenId> prompt) const {
  auto cache = std::make_unique<KvCache>();
  cache->keys.resize(config_.decoder_layers);
  cache->values.resize(config_.decoder_layers);
  const auto audio = audio_inputs(states);
  for (const auto& a : audio) {
    advance(*cache, a, true);
    ++cache->audio_positions;
  }

  PrefillResult result;
  result.audio_ratios.assign(config_.decoder_layers, 0.0);
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    result.output = advance(*cache, text_input(prompt[i], audio.size() + i), false);
    for (std::size_t l = 0; l < config_.decoder_layers; ++l)
      result.audio_ratios[l] += result.output.attn_audio_ratio_per_layer[l];
  }
  for (double& r : result.audio_ratios) r /= static_cast<double>(prompt.size());
  result.state = std::move(cache);
  return result;
}

StepOutput ToyModel::do_step(CacheState& state, std::span<const TokenId> history,
                             TokenId token) const {
  auto* cache = dynamic_cast<KvCache*>(&state);
  if (cache == nullptr) throw std::logic_error("toy model: foreign cache state");
  return advance(*cache, text_input(token, cache->audio_positions + history.size()), false);
}

std::vector<StepOutput> ToyModel::forward_full(const EncoderStates& states,
                                               std::span<const TokenId> tokens,
                                               ToyAttentionProbe* probe) const {
  states.validate();
  for (TokenId t : tokens)
    if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab)
      throw std::invalid_argument("unknown token id " + std::to_string(t));
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.heads;
  const std::size_t dh = d / heads;

  auto rows = audio_inputs(states);
  const std::size_t audio = rows.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) rows.push_back(text_input(tokens[i], audio + i));
  const std::size_t n = rows.size();

  if (probe) {
    probe->audio_positions = audio;
    probe->attention.assign(config_.decoder_layers, {});
  }
  std::vector<std::vector<double>> ratios(n, std::vector<double>(config_.decoder_layers, 0.0));

  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const auto& layer = weights_.decoder[l];
    std::vector<std::vector<double>> q(n), k(n), v(n);
    for (std::size_t p = 0; p < n; ++p) {
      const auto normed = layer_norm(rows[p]);
      q[p] = layer.query.apply(normed);
      k[p] = layer.key.apply(normed);
      v[p] = layer.value.apply(normed);
    }
    std::vector<std::vector<double>> context(n, std::vector<double>(d, 0.0));
    if (probe) probe->attention[l].assign(heads, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t p = 0; p < n; ++p) {
        const bool block_audio = config_.mask_audio && p >= audio;
        std::vector<double> weights(n, 0.0);
        double best = -std::numeric_limits<double>::infinity();
        std::vector<bool> allowed(n, false);
        for (std::size_t key = 0; key <= p; ++key) {
          if (block_audio && key < audio) continue;
          allowed[key] = true;
          double s = 0.0;
          for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) s += q[p][i] * k[key][i];
          weights[key] = s / std::sqrt(static_cast<double>(dh));
          best = std::max(best, weights[key]);
        }
        double total = 0.0;
        for (std::size_t key = 0; key < n; ++key) {
          weights[key] = allowed[key] ? std::exp(weights[key] - best) : 0.0;
          total += weights[key];
        }
        for (std::size_t key = 0; key < n; ++key) {
          weights[key] /= total;
          if (key < audio) ratios[p][l] += weights[key] / static_cast<double>(heads);
          for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) context[p][i] += weights[key] * v[key][i];
        }
        if (probe) probe->attention[l][h][p] = weights;
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      const auto projected = layer.output.apply(context[p]);
      for (std::size_t i = 0; i < d; ++i) rows[p][i] += projected[i];
      auto hidden = layer.ff_in.apply(layer_norm(rows[p]));
      for (double& x : hidden) x = gelu(x);
      const auto ff = layer.ff_out.apply(hidden);
      for (std::size_t i = 0; i < d; ++i) rows[p][i] += ff[i];
    }
  }

  std::vector<StepOutput> outputs;
  for (std::size_t p = audio; p < n; ++p) {
    StepOutput out;
    out.logits = weights_.unembed.apply(layer_norm(rows[p]));
    out.attn_audio_ratio_per_layer = ratios[p];
    for (double& r : out.attn_audio_ratio_per_layer) r = std::clamp(r, 0.0, 1.0);
    outputs.push_back(std::move(out));
  }
  return outputs;
}

// ---------------------------------------------------------- serialization

std::vector<std::uint8_t> ToyModel::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(config_.encoder_layers));
  put_u32(out, static_cast<std::uint32_t>(config_.decoder_layers));
  put_u32(out, static_cast<std::uint32_t>(config_.d_model));
  put_u32(out, static_cast<std::uint32_t>(config_.heads));
  put_u32(out, static_cast<std::uint32_t>(config_.d_ff));
  put_u32(out, static_cast<std::uint32_t>(config_.vocab));
  put_u32(out, static_cast<std::uint32_t>(kFeatures));
  put_u32(out, config_.mask_audio ? 1u : 0u);
  put_u64(out, std::bit_cast<std::uint64_t>(config_.frame_rate));
  put_u64(out, config_.seed);

  ToyWeights copy = weights_;
  std::vector<double> flat;
  for_each_tensor(copy, [&](std::vector<double>& t, double) { flat.insert(flat.end(), t.begin(), t.end()); });
  put_u64(out, flat.size());
  for (double v : flat) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

ToyModel ToyModel::deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0)
    throw std::invalid_argument("toy model fixture: bad magic");
  const auto version = in.u(4);
  if (version != kFormatVersion)
    throw std::invalid_argument("toy model fixture: unsupported version " + std::to_string(version));
  ToyModelConfig c;
  c.encoder_layers = in.u(4);
  c.decoder_layers = in.u(4);
  c.d_model = in.u(4);
  c.heads = in.u(4);
  c.d_ff = in.u(4);
  c.vocab = in.u(4);
  if (in.u(4) != kFeatures) throw std::invalid_argument("toy model fixture: feature count mismatch");
  c.mask_audio = in.u(4) != 0;
  c.frame_rate = in.f64();
  c.seed = in.u(8);
  check_config(c);

  ToyWeights w = shaped_weights(c);
  std::size_t expected = 0;
  for_each_tensor(w, [&](std::vector<double>& t, double) { expected += t.size(); });
  if (in.u(8) != expected) throw std::invalid_argument("toy model fixture: parameter count mismatch");
  for_each_tensor(w, [&](std::vector<double>& t, double) {
    for (double& v : t) v = in.f64();
  });
  if (!in.done()) throw std::invalid_argument("toy model fixture: trailing bytes");
  return ToyModel(c, std::move(w));
}

void ToyModel::save(const std::string& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write toy model fixture '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ToyModel ToyModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open toy model fixture '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace tcd
