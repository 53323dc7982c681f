#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tcd/encoder_states.hpp"
#include "tcd/signal.hpp"
#include "tcd/vocab.hpp"

namespace tcd {

/// Decoder output at one position.
struct StepOutput {
  std::vector<double> logits;
  /// Fraction of attention mass placed on audio positions, one entry per
  /// decoder layer, each in [0, 1].
  std::vector<double> attn_audio_ratio_per_layer;
  bool operator==(const StepOutput&) const = default;
};

/// Backend-specific incremental state (KV cache, table cursor, ...).
class CacheState {
 public:
  virtual ~CacheState() = default;
  /// Bytes held by the cache, for memory accounting.
  virtual std::size_t bytes() const = 0;
};

class AudioLanguageModel;

/// Incremental decoding state of one branch. Move-only; a moved-from handle
/// is invalid and rejected by the model with state_error.
class CacheHandle {
 public:
  CacheHandle() = default;
  CacheHandle(CacheHandle&&) noexcept = default;
  CacheHandle& operator=(CacheHandle&&) noexcept = default;

  bool valid() const { return state_ != nullptr; }
  /// Every text token consumed so far (prompt, then fed tokens).
  std::span<const TokenId> tokens() const { return tokens_; }
  std::size_t position() const { return tokens_.size(); }
  /// Output at the last consumed position, i.e. the next-token prediction.
  const StepOutput& last_output() const { return last_; }
  /// Per-decoder-layer audio ratio averaged over the prompt positions.
  const std::vector<double>& prefill_audio_ratios() const { return prefill_ratios_; }
  std::size_t bytes() const { return state_ ? state_->bytes() : 0; }

 private:
  friend class AudioLanguageModel;

  const AudioLanguageModel* owner_ = nullptr;
  std::unique_ptr<CacheState> state_;
  std::vector<TokenId> tokens_;
  StepOutput last_;
  std::vector<double> prefill_ratios_;
};

/// Unified audio-language model: an encoder producing layered frame states
/// and a text decoder that attends to them. Implementations are immutable
/// after construction and may be shared across threads.
class AudioLanguageModel {
 public:
  virtual ~AudioLanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t num_encoder_layers() const = 0;
  virtual std::size_t num_decoder_layers() const = 0;
  virtual double frame_rate() const = 0;

  EncoderStates encode(const Waveform& x) const;
  /// Consumes the whole prompt. The returned handle's last_output() holds
  /// the prediction for the first generated token.
  CacheHandle prefill(const EncoderStates& states, std::span<const TokenId> prompt) const;
  /// Feeds one token and returns the prediction for the token after it.
  StepOutput decode_step(CacheHandle& cache, TokenId token) const;

 protected:
  struct PrefillResult {
    std::unique_ptr<CacheState> state;
    StepOutput output;
    std::vector<double> audio_ratios;
  };

  virtual EncoderStates do_encode(const Waveform& x) const = 0;
  virtual PrefillResult do_prefill(const EncoderStates& states,
                                   std::span<const TokenId> prompt) const = 0;
  /// `history` excludes `token`.
  virtual StepOutput do_step(CacheState& state, std::span<const TokenId> history,
                             TokenId token) const = 0;

 private:
  void check_token(TokenId token) const;
  void check_output(const StepOutput& out) const;
};

struct ForwardCounters {
  std::uint64_t encoder_forwards = 0;
  std::uint64_t decoder_forwards = 0;

  bool operator==(const ForwardCounters&) const = default;
};

/// Session-local view of a shared model that counts forward passes:
/// one encoder pass per encode, one decoder pass per prefill or step.
class CountedModel {
 public:
  explicit CountedModel(std::shared_ptr<const AudioLanguageModel> model);

  EncoderStates encode(const Waveform& x);
  CacheHandle prefill(const EncoderStates& states, std::span<const TokenId> prompt);
  StepOutput decode_step(CacheHandle& cache, TokenId token);
  /// Runs a prefill pass and returns its per-layer audio ratios.
  std::vector<double> audio_layer_ratios(const EncoderStates& states,
                                         std::span<const TokenId> prompt);

  const ForwardCounters& counters() const { return counters_; }
  const AudioLanguageModel& model() const { return *model_; }
  const std::shared_ptr<const AudioLanguageModel>& shared() const { return model_; }

 private:
  std::shared_ptr<const AudioLanguageModel> model_;
  ForwardCounters counters_;
};

}  // namespace tcd
