#include "tcd/engine.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tcd/config.hpp"
#include "tcd/error.hpp"

namespace tcd {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::size_t peak_rss_bytes() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
  return static_cast<std::size_t>(usage.ru_maxrss) * 1024;
}

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

StabilityParams stability_params(const DecodeConfig& c) {
  return {c.epsilon, c.tau, c.W_min_ms, c.W_max_ms, c.lambda_min, c.lambda_max};
}

}  // namespace

double Transcript::mean_step_ms() const { return mean(step_ms); }
double ProfileRun::mean_step_ms() const { return mean(step_ms); }

Session start_session(std::shared_ptr<const AudioLanguageModel> model, const Waveform& x,
                      std::span<const TokenId> prompt, const DecodeConfig& config,
                      std::optional<TokenId> stop_token) {
  config.validate();
  const auto started = Clock::now();
  Session s(std::move(model));
  s.config_ = config;
  s.stop_token_ = stop_token;
  s.prompt_.assign(prompt.begin(), prompt.end());

  EncoderStates original = s.model_.encode(x);
  original.view = "orig";
  s.original_ = s.model_.prefill(original, prompt);
  s.stability_ = estimate_stability(original, s.original_.prefill_audio_ratios(),
                                    stability_params(config));

  if (config.strategy != Strategy::baseline) {
    EncoderStates slow;
    if (config.strategy == Strategy::tcd_noise_ref) {
      slow = s.model_.encode(noise_reference(x, config.noise_sigma, config.seed));
    } else if (config.slow_path == SlowPath::waveform) {
      slow = s.model_.encode(blur_waveform(x, s.stability_.window_ms));
    } else {
      const auto taps = hann_kernel(s.stability_.window_ms, original.frame_rate).size();
      slow = blur_states(original, std::min(taps, 2 * original.num_frames()));
    }
    slow.view = "slow";
    s.slow_ = s.model_.prefill(slow, prompt);
  }
  s.prefill_ms_ = elapsed_ms(started);
  return s;
}

std::pair<TokenId, GateTrace> Session::step() {
  if (finished_) throw state_error("step: stop token already generated");
  const std::size_t index = generated_.size();
  const auto& z = original_.last_output().logits;

  GateTrace trace;
  if (config_.strategy == Strategy::baseline) {
    trace.step_index = index;
    trace.r_t = audio_reliance(original_.last_output().attn_audio_ratio_per_layer, config_.L_attn);
    trace.entropy_hat = topk_entropy(z, config_.K_ent);
    trace.gate = 0.0;
    trace.chosen_token = argmax(z);
    last_fused_ = z;
  } else {
    auto fused = fuse_logits(z, slow_.last_output().logits,
                             original_.last_output().attn_audio_ratio_per_layer,
                             stability_.lambda, config_, index);
    trace = std::move(fused.trace);
    last_fused_ = std::move(fused.logits);
  }
  last_original_ = z;

  const TokenId chosen = trace.chosen_token;
  model_.decode_step(original_, chosen);
  if (slow_.valid()) model_.decode_step(slow_, chosen);

  generated_.push_back(chosen);
  traces_.push_back(trace);
  if (stop_token_ && chosen == *stop_token_) finished_ = true;
  return {chosen, std::move(trace)};
}

Transcript generate(std::shared_ptr<const AudioLanguageModel> model, const Waveform& x,
                    std::span<const TokenId> prompt, const DecodeConfig& config,
                    std::size_t max_tokens, std::optional<TokenId> stop_token) {
  if (max_tokens < 1) throw std::invalid_argument("generate: max_tokens must be >= 1");
  Session session = start_session(std::move(model), x, prompt, config, stop_token);
  Transcript t;
  t.config = config;
  t.prompt = session.prompt();
  t.prefill_ms = session.prefill_ms();
  while (!session.finished() && session.generated().size() < max_tokens) {
    const auto started = Clock::now();
    session.step();
    t.step_ms.push_back(elapsed_ms(started));
  }
  t.tokens = session.generated();
  t.text = vocab::detokenize(t.tokens);
  t.traces = session.traces();
  t.stability = session.stability();
  t.counters = session.counters();
  t.cache_bytes = session.cache_bytes();
  return t;
}

// ------------------------------------------------------------------ profile

namespace {

ProfileRun profile_one(const std::shared_ptr<const AudioLanguageModel>& model, const Waveform& x,
                       std::span<const TokenId> prompt, const DecodeConfig& config,
                       std::size_t n_steps) {
  ProfileRun run;
  run.strategy = config.strategy;
  Session session = start_session(model, x, prompt, config, std::nullopt);
  run.prefill_ms = session.prefill_ms();
  run.prefill_counters = session.counters();
  for (std::size_t i = 0; i < n_steps; ++i) {
    const auto started = Clock::now();
    session.step();
    run.step_ms.push_back(elapsed_ms(started));
  }
  run.steps = n_steps;
  run.total_counters = session.counters();
  run.cache_bytes = session.cache_bytes();
  run.peak_rss_bytes = peak_rss_bytes();
  return run;
}

}  // namespace

std::optional<double> ProfileReport::prefill_ratio() const {
  if (!tcd) return std::nullopt;
  return static_cast<double>(tcd->prefill_forwards()) /
         static_cast<double>(baseline.prefill_forwards());
}

std::optional<double> ProfileReport::decode_ratio() const {
  if (!tcd) return std::nullopt;
  return static_cast<double>(tcd->decode_forwards()) /
         static_cast<double>(baseline.decode_forwards());
}

ProfileReport profile(std::shared_ptr<const AudioLanguageModel> model, const Waveform& x,
                      std::span<const TokenId> prompt, const DecodeConfig& config,
                      std::size_t n_steps) {
  if (n_steps < 1) throw std::invalid_argument("profile: n_steps must be >= 1");
  ProfileReport report;
  DecodeConfig base = config;
  base.strategy = Strategy::baseline;
  report.baseline = profile_one(model, x, prompt, base, n_steps);
  if (config.strategy != Strategy::baseline)
    report.tcd = profile_one(model, x, prompt, config, n_steps);
  return report;
}

std::string format_profile_report(const ProfileReport& report) {
  std::ostringstream os;
  char line[256];
  const bool both = report.tcd.has_value();
  auto row = [&](const char* label, auto value_of, const char* fmt) {
    std::snprintf(line, sizeof line, "%-26s", label);
    os << line;
    std::snprintf(line, sizeof line, fmt, value_of(report.baseline));
    os << line;
    if (both) {
      std::snprintf(line, sizeof line, fmt, value_of(*report.tcd));
      os << line;
    }
    os << '\n';
  };
  std::snprintf(line, sizeof line, "%-26s%16s", "metric", "baseline");
  os << line;
  if (both) {
    std::snprintf(line, sizeof line, "%16s", std::string(to_string(report.tcd->strategy)).c_str());
    os << line;
  }
  os << '\n';
  row("prefill_ms", [](const ProfileRun& r) { return r.prefill_ms; }, "%16.3f");
  row("decode_ms_per_step", [](const ProfileRun& r) { return r.mean_step_ms(); }, "%16.4f");
  row("decode_steps", [](const ProfileRun& r) { return static_cast<unsigned long long>(r.steps); }, "%16llu");
  row("encoder_forwards_prefill",
      [](const ProfileRun& r) { return static_cast<unsigned long long>(r.prefill_counters.encoder_forwards); }, "%16llu");
  row("decoder_forwards_prefill",
      [](const ProfileRun& r) { return static_cast<unsigned long long>(r.prefill_counters.decoder_forwards); }, "%16llu");
  row("decoder_forwards_decode",
      [](const ProfileRun& r) { return static_cast<unsigned long long>(r.decode_forwards()); }, "%16llu");
  row("kv_cache_bytes", [](const ProfileRun& r) { return static_cast<unsigned long long>(r.cache_bytes); }, "%16llu");
  row("peak_rss_bytes", [](const ProfileRun& r) { return static_cast<unsigned long long>(r.peak_rss_bytes); }, "%16llu");
  if (both) {
    std::snprintf(line, sizeof line, "pass_ratio_prefill        %16.2f\n", *report.prefill_ratio());
    os << line;
    std::snprintf(line, sizeof line, "pass_ratio_decode         %16.2f\n", *report.decode_ratio());
    os << line;
    std::snprintf(line, sizeof line, "wall_ratio_prefill        %16.2f\n",
                  report.tcd->prefill_ms / std::max(report.baseline.prefill_ms, 1e-12));
    os << line;
    std::snprintf(line, sizeof line, "wall_ratio_decode         %16.2f\n",
                  report.tcd->mean_step_ms() / std::max(report.baseline.mean_step_ms(), 1e-12));
    os << line;
  }
  return os.str();
}

// -------------------------------------------------------------- trace I/O

std::string format_session_header(const Transcript& t) {
  std::string out = "session";
  for (const auto& [key, value] : config_entries(t.config)) out += "\t" + key + "=" + value;
  out += "\tprompt=";
  for (std::size_t i = 0; i < t.prompt.size(); ++i) out += (i ? "," : "") + std::to_string(t.prompt[i]);
  out += "\tpooled_S=" + format_real(t.stability.pooled);
  out += "\twindow_ms=" + format_real(t.stability.window_ms);
  out += "\tlambda=" + format_real(t.stability.lambda);
  out += "\tlayers=";
  for (std::size_t l = 0; l < t.stability.per_layer.size(); ++l) {
    const auto& s = t.stability.per_layer[l];
    if (l) out += ';';
    out += format_real(s.magnitude) + ":" + format_real(s.flux) + ":" + format_real(s.stability) +
           ":" + format_real(s.weight);
  }
  return out;
}

void write_trace(std::ostream& out, const Transcript& t) {
  out << format_session_header(t) << '\n';
  for (const auto& step : t.traces) out << format_gate_trace(step) << '\n';
}

std::string format_trace(const Transcript& t) {
  std::ostringstream os;
  write_trace(os, t);
  return os.str();
}

std::string format_transcript_summary(const Transcript& t) {
  std::ostringstream os;
  os << "strategy=" << to_string(t.config.strategy) << '\n';
  os << "tokens=";
  for (std::size_t i = 0; i < t.tokens.size(); ++i) os << (i ? "," : "") << t.tokens[i];
  os << '\n';
  os << "text=" << t.text << '\n';
  os << "steps=" << t.traces.size() << '\n';
  os << "pooled_S=" << format_real(t.stability.pooled) << '\n';
  os << "window_ms=" << format_real(t.stability.window_ms) << '\n';
  os << "lambda=" << format_real(t.stability.lambda) << '\n';
  os << "encoder_forwards=" << t.counters.encoder_forwards << '\n';
  os << "decoder_forwards=" << t.counters.decoder_forwards << '\n';
  os << "prefill_ms=" << format_real(t.prefill_ms) << '\n';
  os << "mean_step_ms=" << format_real(t.mean_step_ms()) << '\n';
  return os.str();
}

TraceFile parse_trace(std::string_view text) {
  TraceFile trace;
  bool have_header = false;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with("session")) {
      if (have_header) throw std::invalid_argument("trace: more than one session header");
      have_header = true;
      auto fields = split(line, '\t');
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument("trace: bad header field");
        trace.header.emplace_back(std::string(fields[i].substr(0, eq)),
                                  std::string(fields[i].substr(eq + 1)));
      }
      continue;
    }
    if (!have_header) throw std::invalid_argument("trace: step record before session header");
    trace.steps.push_back(parse_gate_trace(line));
  }
  if (!have_header) throw std::invalid_argument("trace: missing session header");
  return trace;
}

std::string pretty_print_trace(const TraceFile& trace) {
  std::ostringstream os;
  for (const auto& [key, value] : trace.header) os << key << " = " << value << '\n';
  os << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%5s %10s %10s %10s %6s %8s %12s  %s\n", "step", "r_t",
                "entropy", "gate", "|omega|", "changed", "max_bias", "chosen");
  os << line;
  for (const auto& s : trace.steps) {
    std::size_t changed = 0;
    double max_bias = 0.0;
    for (const auto& [id, bias] : s.applied_bias) {
      if (bias != 0.0) ++changed;
      if (std::abs(bias) > std::abs(max_bias)) max_bias = bias;
    }
    std::string chosen = std::to_string(s.chosen_token);
    if (s.chosen_token >= 0 && static_cast<std::size_t>(s.chosen_token) < vocab::size())
      chosen += " (" + vocab::token_text(s.chosen_token) + ")";
    std::snprintf(line, sizeof line, "%5zu %10.6f %10.6f %10.6f %6zu %8zu %12.6g  %s\n", s.step_index,
                  s.r_t, s.entropy_hat, s.gate, s.candidate_ids.size(), changed, max_bias,
                  chosen.c_str());
    os << line;
  }
  return os.str();
}

}  // namespace tcd
