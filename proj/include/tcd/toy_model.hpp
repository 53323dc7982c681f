#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcd/model.hpp"

namespace tcd {

struct ToyModelConfig {
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t d_ff = 64;
  std::size_t vocab = 64;
  double frame_rate = 50.0;
  std::uint64_t seed = 1234;
  /// When set, text positions cannot attend to audio positions.
  bool mask_audio = false;
};

/// Affine map y = W x + b with row-major W (out x in).
struct Dense {
  std::size_t out = 0;
  std::size_t in = 0;
  std::vector<double> weight;
  std::vector<double> bias;  // empty means no bias

  std::vector<double> apply(std::span<const double> x) const;
};

struct ToyEncoderLayer {
  Dense current;   // acts on frame tau
  Dense previous;  // acts on frame tau - 1, no bias
};

struct ToyDecoderLayer {
  Dense query, key, value, output;
  Dense ff_in, ff_out;
};

struct ToyWeights {
  std::vector<ToyEncoderLayer> encoder;
  Dense adapter;
  std::vector<double> audio_segment;
  std::vector<double> text_segment;
  std::vector<double> embedding;  // vocab x d_model
  std::vector<ToyDecoderLayer> decoder;
  Dense unembed;
};

/// Raw attention weights from a full (uncached) forward pass:
/// attention[layer][head][query][key] over all positions, audio first.
struct ToyAttentionProbe {
  std::size_t audio_positions = 0;
  std::vector<std::vector<std::vector<std::vector<double>>>> attention;
};

/// Desk-scale unified audio-LM with fixed-seed random weights. The encoder
/// turns 20 ms frames of simple acoustic features (energy, peak, slope,
/// zero crossings, four Goertzel bands) into layered states; the decoder is a
/// pre-norm causal transformer over [audio frames; text tokens] with a
/// per-layer KV cache.
class ToyModel final : public AudioLanguageModel {
 public:
  static constexpr std::size_t kFeatures = 8;

  explicit ToyModel(ToyModelConfig config = {});
  ToyModel(ToyModelConfig config, ToyWeights weights);

  std::size_t vocab_size() const override { return config_.vocab; }
  std::size_t num_encoder_layers() const override { return config_.encoder_layers; }
  std::size_t num_decoder_layers() const override { return config_.decoder_layers; }
  double frame_rate() const override { return config_.frame_rate; }

  const ToyModelConfig& config() const { return config_; }
  const ToyWeights& weights() const { return weights_; }

  /// Per-frame acoustic features fed to the first encoder layer.
  std::vector<std::vector<double>> frame_features(const Waveform& x) const;
  /// Encoder forward on precomputed features.
  EncoderStates encode_features(const std::vector<std::vector<double>>& features) const;

  /// Recomputes the decoder over the whole [audio; tokens] sequence with no
  /// cache. Entry i is the output after consuming tokens[0..i].
  std::vector<StepOutput> forward_full(const EncoderStates& states,
                                       std::span<const TokenId> tokens,
                                       ToyAttentionProbe* probe = nullptr) const;

  /// Versioned little-endian binary fixture; see README for the layout.
  std::vector<std::uint8_t> serialize() const;
  static ToyModel deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static ToyModel load(const std::string& path);

 protected:
  EncoderStates do_encode(const Waveform& x) const override;
  PrefillResult do_prefill(const EncoderStates& states,
                           std::span<const TokenId> prompt) const override;
  StepOutput do_step(CacheState& state, std::span<const TokenId> history,
                     TokenId token) const override;

 private:
  struct KvCache;

  std::vector<std::vector<double>> audio_inputs(const EncoderStates& states) const;
  std::vector<double> text_input(TokenId token, std::size_t position) const;
  StepOutput advance(KvCache& cache, std::vector<double> x, bool is_audio) const;

  ToyModelConfig config_;
  ToyWeights weights_;
};

ToyWeights make_toy_weights(const ToyModelConfig& config);

}  // namespace tcd
