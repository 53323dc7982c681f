#include "tcd/scripted_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tcd/error.hpp"

namespace tcd {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    parts.push_back(s.substr(start, at == std::string_view::npos ? s.npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \r");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \r") - first + 1);
}

std::vector<double> parse_reals(std::string_view s, std::size_t line) {
  std::vector<double> out;
  for (auto part : split(s, ',')) {
    part = trim(part);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size())
      throw std::invalid_argument("scripted spec line " + std::to_string(line) + ": bad number '" +
                                  std::string(part) + "'");
    out.push_back(v);
  }
  return out;
}

std::string join_reals(const std::vector<double>& values) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values[i]);
    out.append(buf, ptr);
  }
  return out;
}

struct ScriptCursor final : CacheState {
  std::string view;
  std::size_t bytes() const override { return sizeof(*this); }
};

}  // namespace

void ScriptedModelSpec::set(std::string view, std::vector<TokenId> prefix, StepOutput output) {
  entries[Key{std::move(view), std::move(prefix), false}] = std::move(output);
}

void ScriptedModelSpec::set_default(std::string view, StepOutput output) {
  entries[Key{std::move(view), {}, true}] = std::move(output);
}

const StepOutput* ScriptedModelSpec::find(const std::string& view,
                                          std::span<const TokenId> prefix) const {
  Key key{view, std::vector<TokenId>(prefix.begin(), prefix.end()), false};
  if (auto it = entries.find(key); it != entries.end()) return &it->second;
  key.prefix.clear();
  key.wildcard = true;
  if (auto it = entries.find(key); it != entries.end()) return &it->second;
  return nullptr;
}

std::size_t ScriptedModelSpec::vocab_size() const {
  return entries.empty() ? 0 : entries.begin()->second.logits.size();
}

std::size_t ScriptedModelSpec::num_layers() const {
  return entries.empty() ? 0 : entries.begin()->second.attn_audio_ratio_per_layer.size();
}

void ScriptedModelSpec::validate() const {
  if (entries.empty()) throw std::invalid_argument("scripted spec: no entries");
  const std::size_t vocab = vocab_size();
  const std::size_t layers = num_layers();
  if (vocab == 0 || layers == 0)
    throw std::invalid_argument("scripted spec: empty logits or ratio vectors");
  for (const auto& [key, out] : entries) {
    if (out.logits.size() != vocab || out.attn_audio_ratio_per_layer.size() != layers)
      throw std::invalid_argument("scripted spec: entries disagree on vocabulary or layer count");
    for (double z : out.logits)
      if (!std::isfinite(z)) throw std::invalid_argument("scripted spec: non-finite logit");
    for (double r : out.attn_audio_ratio_per_layer)
      if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("scripted spec: ratio outside [0, 1]");
    for (TokenId t : key.prefix)
      if (t < 0 || static_cast<std::size_t>(t) >= vocab)
        throw std::invalid_argument("scripted spec: prefix token outside vocabulary");
  }
}

ScriptedModelSpec parse_scripted_spec(std::string_view text) {
  ScriptedModelSpec spec;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4)
      throw std::invalid_argument("scripted spec line " + std::to_string(line_no) +
                                  ": expected 4 tab-separated fields");
    StepOutput out{parse_reals(fields[2], line_no), parse_reals(fields[3], line_no)};
    const std::string view(trim(fields[0]));
    const auto prefix_text = trim(fields[1]);
    if (prefix_text == "*") {
      spec.set_default(view, std::move(out));
      continue;
    }
    std::vector<TokenId> prefix;
    if (prefix_text != "-") {
      for (auto tok : split(prefix_text, ' ')) {
        if (tok.empty()) continue;
        TokenId id = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), id);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          throw std::invalid_argument("scripted spec line " + std::to_string(line_no) +
                                      ": bad token id '" + std::string(tok) + "'");
        prefix.push_back(id);
      }
    }
    spec.set(view, std::move(prefix), std::move(out));
  }
  spec.validate();
  return spec;
}

std::string format_scripted_spec(const ScriptedModelSpec& spec) {
  std::string out;
  for (const auto& [key, value] : spec.entries) {
    out += key.view;
    out += '\t';
    if (key.wildcard) {
      out += '*';
    } else if (key.prefix.empty()) {
      out += '-';
    } else {
      for (std::size_t i = 0; i < key.prefix.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(key.prefix[i]);
      }
    }
    out += '\t';
    out += join_reals(value.logits);
    out += '\t';
    out += join_reals(value.attn_audio_ratio_per_layer);
    out += '\n';
  }
  return out;
}

ScriptedModelSpec load_scripted_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scripted spec '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scripted_spec(buf.str());
}

ScriptedModel::ScriptedModel(ScriptedModelSpec spec, std::size_t encoder_layers)
    : spec_(std::move(spec)), encoder_layers_(encoder_layers) {
  spec_.validate();
  if (encoder_layers_ == 0) throw std::invalid_argument("scripted model: need an encoder layer");
}

EncoderStates ScriptedModel::do_encode(const Waveform& x) const {
  // Two features per 20 ms frame (RMS, mean absolute slope), scaled per
  // layer. Enough structure for stability statistics, nothing more.
  const auto frame_len = static_cast<std::size_t>(x.sample_rate / 50);
  if (frame_len == 0 || x.samples.size() < frame_len)
    throw std::invalid_argument("scripted model: waveform shorter than one frame");
  const std::size_t frames = x.samples.size() / frame_len;
  EncoderStates states;
  states.frame_rate = 50.0;
  states.layers.assign(encoder_layers_, FrameSequence(frames, Frame(2, 0.0)));
  for (std::size_t t = 0; t < frames; ++t) {
    double energy = 0.0, slope = 0.0;
    for (std::size_t i = 0; i < frame_len; ++i) {
      const double v = x.samples[t * frame_len + i];
      energy += v * v;
      if (i > 0) slope += std::abs(v - x.samples[t * frame_len + i - 1]);
    }
    const double a = std::sqrt(energy / static_cast<double>(frame_len));
    const double b = slope / static_cast<double>(frame_len);
    for (std::size_t l = 0; l < encoder_layers_; ++l) {
      const double gain = static_cast<double>(l + 1);
      states.layers[l][t] = {gain * a + 0.1, gain * b + 0.1};
    }
  }
  return states;
}

const StepOutput& ScriptedModel::lookup(const std::string& view,
                                        std::span<const TokenId> prefix) const {
  const StepOutput* out = spec_.find(view, prefix);
  if (out == nullptr) {
    std::string ids;
    for (TokenId t : prefix) ids += (ids.empty() ? "" : " ") + std::to_string(t);
    throw state_error("scripted model: no entry for view '" + view + "' prefix [" + ids + "]");
  }
  return *out;
}

ScriptedModel::PrefillResult ScriptedModel::do_prefill(const EncoderStates& states,
                                                       std::span<const TokenId> prompt) const {
  auto cursor = std::make_unique<ScriptCursor>();
  cursor->view = states.view;
  PrefillResult result;
  result.output = lookup(states.view, prompt);
  result.audio_ratios = result.output.attn_audio_ratio_per_layer;
  result.state = std::move(cursor);
  return result;
}

StepOutput ScriptedModel::do_step(CacheState& state, std::span<const TokenId> history,
                                  TokenId token) const {
  auto* cursor = dynamic_cast<ScriptCursor*>(&state);
  if (cursor == nullptr) throw std::logic_error("scripted model: foreign cache state");
  std::vector<TokenId> prefix(history.begin(), history.end());
  prefix.push_back(token);
  return lookup(cursor->view, prefix);
}

}  // namespace tcd
