#include "tcd/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tcd/error.hpp"

namespace tcd {

void AudioLanguageModel::check_token(TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_size())
    throw std::invalid_argument("unknown token id " + std::to_string(token));
}

void AudioLanguageModel::check_output(const StepOutput& out) const {
  if (out.logits.size() != vocab_size())
    throw std::logic_error("backend returned logits of the wrong length");
  if (out.attn_audio_ratio_per_layer.size() != num_decoder_layers())
    throw std::logic_error("backend returned the wrong number of audio ratios");
  for (double r : out.attn_audio_ratio_per_layer)
    if (!(r >= 0.0 && r <= 1.0)) throw std::logic_error("audio ratio outside [0, 1]");
  for (double z : out.logits)
    if (!std::isfinite(z)) throw std::logic_error("backend returned a non-finite logit");
}

EncoderStates AudioLanguageModel::encode(const Waveform& x) const {
  x.validate();
  EncoderStates states = do_encode(x);
  states.validate();
  return states;
}

CacheHandle AudioLanguageModel::prefill(const EncoderStates& states,
                                        std::span<const TokenId> prompt) const {
  if (prompt.empty()) throw std::invalid_argument("prefill: prompt must not be empty");
  for (TokenId t : prompt) check_token(t);
  states.validate();
  PrefillResult result = do_prefill(states, prompt);
  check_output(result.output);
  CacheHandle handle;
  handle.owner_ = this;
  handle.state_ = std::move(result.state);
  handle.tokens_.assign(prompt.begin(), prompt.end());
  handle.last_ = std::move(result.output);
  handle.prefill_ratios_ = std::move(result.audio_ratios);
  return handle;
}

StepOutput AudioLanguageModel::decode_step(CacheHandle& cache, TokenId token) const {
  if (!cache.valid()) throw state_error("decode_step: invalid cache handle");
  if (cache.owner_ != this) throw state_error("decode_step: cache belongs to another model");
  check_token(token);
  StepOutput out = do_step(*cache.state_, cache.tokens_, token);
  check_output(out);
  cache.tokens_.push_back(token);
  cache.last_ = out;
  return out;
}

CountedModel::CountedModel(std::shared_ptr<const AudioLanguageModel> model)
    : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("CountedModel: null model");
}

EncoderStates CountedModel::encode(const Waveform& x) {
  auto states = model_->encode(x);
  ++counters_.encoder_forwards;
  return states;
}

CacheHandle CountedModel::prefill(const EncoderStates& states, std::span<const TokenId> prompt) {
  auto cache = model_->prefill(states, prompt);
  ++counters_.decoder_forwards;
  return cache;
}

StepOutput CountedModel::decode_step(CacheHandle& cache, TokenId token) {
  auto out = model_->decode_step(cache, token);
  ++counters_.decoder_forwards;
  return out;
}

std::vector<double> CountedModel::audio_layer_ratios(const EncoderStates& states,
                                                     std::span<const TokenId> prompt) {
  return prefill(states, prompt).prefill_audio_ratios();
}

}  // namespace tcd
