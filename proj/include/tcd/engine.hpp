#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcd/fusion.hpp"
#include "tcd/model.hpp"
#include "tcd/stability.hpp"

namespace tcd {

struct Transcript {
  DecodeConfig config;
  std::vector<TokenId> prompt;
  std::vector<TokenId> tokens;
  std::string text;
  std::vector<GateTrace> traces;
  StabilityReport stability;
  ForwardCounters counters;
  double prefill_ms = 0.0;
  std::vector<double> step_ms;
  std::size_t cache_bytes = 0;

  double mean_step_ms() const;
};

/// Dual-branch greedy decoding of one example. The original branch decodes
/// against the encoder states of the input audio; the slow-path branch
/// decodes the same text prefix against a blurred (or, for the noise
/// ablation, perturbed) view. Both caches always hold the same tokens.
class Session {
 public:
  Session(Session&&) noexcept = default;
  Session& operator=(Session&&) noexcept = default;

  /// Chooses the next token from the fused logits and feeds it to both
  /// branches. Throws state_error once the stop token has been chosen.
  std::pair<TokenId, GateTrace> step();

  bool finished() const { return finished_; }
  bool has_slow_path() const { return slow_.valid(); }

  const DecodeConfig& config() const { return config_; }
  const StabilityReport& stability() const { return stability_; }
  const std::vector<TokenId>& prompt() const { return prompt_; }
  const std::vector<TokenId>& generated() const { return generated_; }
  const std::vector<GateTrace>& traces() const { return traces_; }
  const ForwardCounters& counters() const { return model_.counters(); }
  const CacheHandle& original_cache() const { return original_; }
  const CacheHandle& slow_cache() const { return slow_; }
  /// Original-view logits and the fused logits of the most recent step.
  const std::vector<double>& last_original_logits() const { return last_original_; }
  const std::vector<double>& last_fused_logits() const { return last_fused_; }
  double prefill_ms() const { return prefill_ms_; }
  std::size_t cache_bytes() const { return original_.bytes() + slow_.bytes(); }

 private:
  friend Session start_session(std::shared_ptr<const AudioLanguageModel>, const Waveform&,
                               std::span<const TokenId>, const DecodeConfig&,
                               std::optional<TokenId>);
  explicit Session(std::shared_ptr<const AudioLanguageModel> model) : model_(std::move(model)) {}

  CountedModel model_;
  DecodeConfig config_;
  std::optional<TokenId> stop_token_;
  std::vector<TokenId> prompt_;
  StabilityReport stability_;
  CacheHandle original_;
  CacheHandle slow_;
  std::vector<TokenId> generated_;
  std::vector<GateTrace> traces_;
  std::vector<double> last_original_;
  std::vector<double> last_fused_;
  double prefill_ms_ = 0.0;
  bool finished_ = false;
};

/// encode(x), prefill the original branch, estimate stability from its
/// states and audio ratios, map to (W, lambda), build the slow-path view,
/// encode it and prefill the second branch. Baseline skips the slow path.
Session start_session(std::shared_ptr<const AudioLanguageModel> model, const Waveform& x,
                      std::span<const TokenId> prompt, const DecodeConfig& config,
                      std::optional<TokenId> stop_token = vocab::kEos);

/// Greedy generation until the stop token or max_tokens.
Transcript generate(std::shared_ptr<const AudioLanguageModel> model, const Waveform& x,
                    std::span<const TokenId> prompt, const DecodeConfig& config,
                    std::size_t max_tokens, std::optional<TokenId> stop_token = vocab::kEos);

struct ProfileRun {
  Strategy strategy = Strategy::baseline;
  ForwardCounters prefill_counters;
  ForwardCounters total_counters;
  std::size_t steps = 0;
  double prefill_ms = 0.0;
  std::vector<double> step_ms;
  std::size_t cache_bytes = 0;
  std::size_t peak_rss_bytes = 0;

  double mean_step_ms() const;
  std::uint64_t prefill_forwards() const {
    return prefill_counters.encoder_forwards + prefill_counters.decoder_forwards;
  }
  std::uint64_t decode_forwards() const {
    return total_counters.decoder_forwards - prefill_counters.decoder_forwards;
  }
};

struct ProfileReport {
  ProfileRun baseline;
  std::optional<ProfileRun> tcd;

  /// Pass-count ratios tcd / baseline; nullopt for a baseline-only report.
  std::optional<double> prefill_ratio() const;
  std::optional<double> decode_ratio() const;
};

/// Times exactly n_steps decode steps (the stop token is ignored) for the
/// baseline and, unless config.strategy is baseline, for that strategy.
ProfileReport profile(std::shared_ptr<const AudioLanguageModel> model, const Waveform& x,
                      std::span<const TokenId> prompt, const DecodeConfig& config,
                      std::size_t n_steps);
std::string format_profile_report(const ProfileReport& report);

// Trace stream: one "session" header record, then one record per step.
std::string format_session_header(const Transcript& t);
void write_trace(std::ostream& out, const Transcript& t);
std::string format_trace(const Transcript& t);
/// Flat key=value summary, one pair per line.
std::string format_transcript_summary(const Transcript& t);

struct TraceFile {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<GateTrace> steps;
};
TraceFile parse_trace(std::string_view text);
std::string pretty_print_trace(const TraceFile& trace);

}  // namespace tcd
