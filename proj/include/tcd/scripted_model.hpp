#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcd/model.hpp"

namespace tcd {

/// Table-driven decoder outputs keyed by (audio-view tag, consumed prefix).
/// A "*" prefix entry is the fallback for any prefix of that view without
/// an exact entry.
struct ScriptedModelSpec {
  struct Key {
    std::string view;
    std::vector<TokenId> prefix;
    bool wildcard = false;

    auto operator<=>(const Key&) const = default;
  };

  std::map<Key, StepOutput> entries;

  void set(std::string view, std::vector<TokenId> prefix, StepOutput output);
  void set_default(std::string view, StepOutput output);
  /// Exact entry, else the view's wildcard entry, else nullptr.
  const StepOutput* find(const std::string& view, std::span<const TokenId> prefix) const;

  std::size_t vocab_size() const;
  std::size_t num_layers() const;
  /// Throws std::invalid_argument on empty tables or inconsistent widths.
  void validate() const;
};

// Text format, one entry per line, tab separated:
//   view <TAB> prefix <TAB> logits <TAB> ratios
// prefix is space-separated token ids, "-" for the empty prefix or "*" for
// the wildcard; logits and ratios are comma-separated reals. Lines starting
// with '#' are comments.
ScriptedModelSpec parse_scripted_spec(std::string_view text);
std::string format_scripted_spec(const ScriptedModelSpec& spec);
ScriptedModelSpec load_scripted_spec(const std::string& path);

/// Exact oracle backend. The view tag of the encoder states (set by the
/// decoding engine) selects the table; the waveform only shapes the encoder
/// states so stability statistics remain meaningful.
class ScriptedModel final : public AudioLanguageModel {
 public:
  explicit ScriptedModel(ScriptedModelSpec spec, std::size_t encoder_layers = 2);

  std::size_t vocab_size() const override { return spec_.vocab_size(); }
  std::size_t num_encoder_layers() const override { return encoder_layers_; }
  std::size_t num_decoder_layers() const override { return spec_.num_layers(); }
  double frame_rate() const override { return 50.0; }

  const ScriptedModelSpec& spec() const { return spec_; }

 protected:
  EncoderStates do_encode(const Waveform& x) const override;
  PrefillResult do_prefill(const EncoderStates& states,
                           std::span<const TokenId> prompt) const override;
  StepOutput do_step(CacheState& state, std::span<const TokenId> history,
                     TokenId token) const override;

 private:
  const StepOutput& lookup(const std::string& view, std::span<const TokenId> prefix) const;

  ScriptedModelSpec spec_;
  std::size_t encoder_layers_;
};

}  // namespace tcd
