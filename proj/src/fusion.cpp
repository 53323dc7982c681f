#include "tcd/fusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "tcd/error.hpp"

namespace tcd {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

void check_omega(std::span<const TokenId> omega, std::size_t vocab, const char* what) {
  for (TokenId j : omega)
    if (j < 0 || static_cast<std::size_t>(j) >= vocab)
      throw std::invalid_argument(std::string(what) + ": candidate id outside vocabulary");
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

template <typename T>
T parse_number(std::string_view s, std::string_view field) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("trace record: bad value for " + std::string(field) + ": '" +
                                std::string(s) + "'");
  return v;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::tcd: return "tcd";
    case Strategy::tcd_no_gate: return "tcd_no_gate";
    case Strategy::tcd_signed: return "tcd_signed";
    case Strategy::tcd_noise_ref: return "tcd_noise_ref";
  }
  return "?";
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = {Strategy::baseline, Strategy::tcd,
                                            Strategy::tcd_no_gate, Strategy::tcd_signed,
                                            Strategy::tcd_noise_ref};
  return all;
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : all_strategies())
    if (to_string(s) == name) return s;
  throw config_error("strategy", "unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(SlowPath p) { return p == SlowPath::waveform ? "waveform" : "states"; }

SlowPath parse_slow_path(std::string_view name) {
  if (name == "waveform") return SlowPath::waveform;
  if (name == "states") return SlowPath::states;
  throw config_error("slow_path", "unknown slow path '" + std::string(name) + "'");
}

void DecodeConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(W_min_ms) || !(W_min_ms > 0.0)) throw config_error("W_min_ms", "must be > 0");
  if (!finite(W_max_ms) || !(W_max_ms > 0.0)) throw config_error("W_max_ms", "must be > 0");
  if (W_min_ms > W_max_ms) throw config_error("W_min_ms", "must not exceed W_max_ms");
  if (!finite(lambda_min) || lambda_min < 0.0) throw config_error("lambda_min", "must be >= 0");
  if (!finite(lambda_max) || lambda_max < 0.0) throw config_error("lambda_max", "must be >= 0");
  if (lambda_min > lambda_max) throw config_error("lambda_min", "must not exceed lambda_max");
  if (K_orig < 1) throw config_error("K_orig", "must be >= 1");
  if (K_blur < 1) throw config_error("K_blur", "must be >= 1");
  if (K_ent < 2) throw config_error("K_ent", "must be >= 2");
  if (!finite(gamma_gate) || gamma_gate < 0.0) throw config_error("gamma_gate", "must be >= 0");
  if (!finite(alpha) || alpha < 0.0) throw config_error("alpha", "must be >= 0");
  if (!finite(tau)) throw config_error("tau", "must be finite");
  if (L_attn < 1) throw config_error("L_attn", "must be >= 1");
  if (!finite(epsilon) || !(epsilon > 0.0)) throw config_error("epsilon", "must be > 0");
  if (!finite(noise_sigma) || noise_sigma < 0.0) throw config_error("noise_sigma", "must be >= 0");
}

std::vector<double> rectified_diff(std::span<const double> z, std::span<const double> z_blur) {
  require_same_length(z, z_blur, "rectified_diff");
  std::vector<double> d(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) d[j] = std::max(z[j] - z_blur[j], 0.0);
  return d;
}

std::vector<double> contrast(std::span<const double> z, std::span<const double> z_blur) {
  require_same_length(z, z_blur, "contrast");
  std::vector<double> d(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) d[j] = z[j] - z_blur[j];
  return d;
}

std::vector<TokenId> top_k_ids(std::span<const double> z, std::size_t k) {
  if (k < 1 || k > z.size()) throw std::invalid_argument("top_k_ids: k must be in [1, |V|]");
  std::vector<TokenId> ids(z.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) {
                      const double za = z[static_cast<std::size_t>(a)];
                      const double zb = z[static_cast<std::size_t>(b)];
                      return za != zb ? za > zb : a < b;
                    });
  ids.resize(k);
  return ids;
}

std::vector<TokenId> candidate_set(std::span<const double> z, std::span<const double> z_blur,
                                   std::size_t k_orig, std::size_t k_blur) {
  require_same_length(z, z_blur, "candidate_set");
  auto omega = top_k_ids(z, k_orig);
  const auto blur = top_k_ids(z_blur, k_blur);
  omega.insert(omega.end(), blur.begin(), blur.end());
  std::sort(omega.begin(), omega.end());
  omega.erase(std::unique(omega.begin(), omega.end()), omega.end());
  return omega;
}

double audio_reliance(std::span<const double> ratios_per_layer, std::size_t l_attn) {
  if (ratios_per_layer.empty()) throw std::invalid_argument("audio_reliance: no decoder layers");
  const std::size_t take = std::min(std::max<std::size_t>(l_attn, 1), ratios_per_layer.size());
  double acc = 0.0;
  for (std::size_t i = ratios_per_layer.size() - take; i < ratios_per_layer.size(); ++i)
    acc += ratios_per_layer[i];
  return std::clamp(acc / static_cast<double>(take), 0.0, 1.0);
}

double topk_entropy(std::span<const double> z, std::size_t k) {
  if (k < 2) throw std::invalid_argument("topk_entropy: K_ent must be >= 2");
  if (k > z.size()) throw std::invalid_argument("topk_entropy: K_ent exceeds vocabulary size");
  const auto top = top_k_ids(z, k);
  // softmax then renormalize over the top k equals a softmax over the top k
  const double peak = z[static_cast<std::size_t>(top.front())];
  std::vector<double> p(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = std::exp(z[static_cast<std::size_t>(top[i])] - peak);
    total += p[i];
  }
  double entropy = 0.0;
  for (double& v : p) {
    v /= total;
    if (v > 0.0) entropy -= v * std::log(v);
  }
  return std::clamp(entropy / std::log(static_cast<double>(k)), 0.0, 1.0);
}

double gate(double r_t, double entropy_hat, double gamma_gate, double alpha) {
  if (r_t < 0.0 || entropy_hat < 0.0 || gamma_gate < 0.0 || alpha < 0.0)
    throw std::invalid_argument("gate: inputs must be non-negative");
  const double uncertainty = alpha == 0.0 ? 1.0 : std::pow(entropy_hat, alpha);
  return std::clamp(gamma_gate * r_t * uncertainty, 0.0, 1.0);
}

std::vector<double> apply_update(std::span<const double> z, std::span<const double> d_plus,
                                 std::span<const TokenId> omega, double lambda, double g) {
  require_same_length(z, d_plus, "apply_update");
  check_omega(omega, z.size(), "apply_update");
  std::vector<double> out(z.begin(), z.end());
  for (TokenId j : omega) {
    const auto i = static_cast<std::size_t>(j);
    out[i] = z[i] + lambda * g * d_plus[i];
  }
  return out;
}

std::vector<double> signed_update(std::span<const double> z, std::span<const double> d,
                                  std::span<const TokenId> omega, double lambda, double g) {
  require_same_length(z, d, "signed_update");
  check_omega(omega, z.size(), "signed_update");
  std::vector<double> out(z.begin(), z.end());
  for (TokenId j : omega) {
    const auto i = static_cast<std::size_t>(j);
    out[i] = z[i] + lambda * g * d[i];
  }
  return out;
}

TokenId argmax(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t j = 1; j < z.size(); ++j)
    if (z[j] > z[best]) best = j;
  return static_cast<TokenId>(best);
}

FusedStep fuse_logits(std::span<const double> z, std::span<const double> z_blur,
                      std::span<const double> ratios_per_layer, double lambda,
                      const DecodeConfig& config, std::size_t step_index) {
  require_same_length(z, z_blur, "fuse_logits");
  FusedStep step;
  auto& trace = step.trace;
  trace.step_index = step_index;
  trace.candidate_ids = candidate_set(z, z_blur, std::min(config.K_orig, z.size()),
                                      std::min(config.K_blur, z.size()));
  trace.r_t = audio_reliance(ratios_per_layer, config.L_attn);
  trace.entropy_hat = topk_entropy(z, config.K_ent);
  trace.gate = config.strategy == Strategy::tcd_no_gate
                   ? 1.0
                   : gate(trace.r_t, trace.entropy_hat, config.gamma_gate, config.alpha);

  const bool is_signed = config.strategy == Strategy::tcd_signed;
  const auto d = is_signed ? contrast(z, z_blur) : rectified_diff(z, z_blur);
  step.logits = is_signed ? signed_update(z, d, trace.candidate_ids, lambda, trace.gate)
                          : apply_update(z, d, trace.candidate_ids, lambda, trace.gate);
  for (TokenId j : trace.candidate_ids) {
    const auto i = static_cast<std::size_t>(j);
    trace.applied_bias.emplace_back(j, lambda * trace.gate * d[i]);
  }
  trace.chosen_token = argmax(step.logits);
  return step;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string format_gate_trace(const GateTrace& t) {
  std::string out = "step=" + std::to_string(t.step_index);
  out += "\tr_t=" + format_real(t.r_t);
  out += "\tentropy_hat=" + format_real(t.entropy_hat);
  out += "\tgate=" + format_real(t.gate);
  out += "\tomega=";
  for (std::size_t i = 0; i < t.candidate_ids.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(t.candidate_ids[i]);
  }
  out += "\tbias=";
  for (std::size_t i = 0; i < t.applied_bias.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(t.applied_bias[i].first) + ':' + format_real(t.applied_bias[i].second);
  }
  out += "\tchosen=" + std::to_string(t.chosen_token);
  return out;
}

GateTrace parse_gate_trace(std::string_view line) {
  static constexpr std::string_view kFields[] = {"step", "r_t", "entropy_hat", "gate",
                                                 "omega", "bias", "chosen"};
  const auto parts = split(line, '\t');
  if (parts.size() != std::size(kFields))
    throw std::invalid_argument("trace record: expected 7 fields");
  GateTrace t;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string_view::npos || parts[i].substr(0, eq) != kFields[i])
      throw std::invalid_argument("trace record: expected field '" + std::string(kFields[i]) + "'");
    const auto value = parts[i].substr(eq + 1);
    switch (i) {
      case 0: t.step_index = parse_number<std::size_t>(value, kFields[i]); break;
      case 1: t.r_t = parse_number<double>(value, kFields[i]); break;
      case 2: t.entropy_hat = parse_number<double>(value, kFields[i]); break;
      case 3: t.gate = parse_number<double>(value, kFields[i]); break;
      case 4:
        if (!value.empty())
          for (auto id : split(value, ',')) t.candidate_ids.push_back(parse_number<TokenId>(id, "omega"));
        break;
      case 5:
        if (!value.empty())
          for (auto entry : split(value, ',')) {
            const auto colon = entry.find(':');
            if (colon == std::string_view::npos) throw std::invalid_argument("trace record: bad bias entry");
            t.applied_bias.emplace_back(parse_number<TokenId>(entry.substr(0, colon), "bias"),
                                        parse_number<double>(entry.substr(colon + 1), "bias"));
          }
        break;
      default: t.chosen_token = parse_number<TokenId>(value, kFields[i]); break;
    }
  }
  return t;
}

}  // namespace tcd
