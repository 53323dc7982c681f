#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcd/vocab.hpp"

namespace tcd {

enum class Strategy { baseline, tcd, tcd_no_gate, tcd_signed, tcd_noise_ref };

/// Which operator builds the slow-path view: blur the waveform and
/// re-encode it, or blur the original encoder states directly.
enum class SlowPath { waveform, states };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);
std::string_view to_string(SlowPath p);
SlowPath parse_slow_path(std::string_view name);
const std::vector<Strategy>& all_strategies();

/// Decoding hyperparameters. Defaults are the reference configuration.
struct DecodeConfig {
  double W_min_ms = 8.0;
  double W_max_ms = 30.0;
  double lambda_min = 0.3;
  double lambda_max = 1.5;
  std::size_t K_orig = 16;
  std::size_t K_blur = 8;
  std::size_t K_ent = 5;
  double gamma_gate = 2.0;
  double alpha = 0.5;
  double tau = 4.0;
  std::size_t L_attn = 4;
  double epsilon = 1e-6;
  Strategy strategy = Strategy::tcd;
  SlowPath slow_path = SlowPath::waveform;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;

  /// Throws config_error naming the first offending key.
  void validate() const;
  bool operator==(const DecodeConfig&) const = default;
};

/// One decoding step as seen by the fusion rule.
struct GateTrace {
  std::size_t step_index = 0;
  double r_t = 0.0;
  double entropy_hat = 0.0;
  double gate = 0.0;
  std::vector<TokenId> candidate_ids;                   // ascending
  std::vector<std::pair<TokenId, double>> applied_bias;  // ascending by id
  TokenId chosen_token = 0;

  bool operator==(const GateTrace&) const = default;
};

/// max(z - z_blur, 0) elementwise.
std::vector<double> rectified_diff(std::span<const double> z, std::span<const double> z_blur);
/// z - z_blur elementwise.
std::vector<double> contrast(std::span<const double> z, std::span<const double> z_blur);

/// Ids of the k largest entries, ordered by value then ascending id.
std::vector<TokenId> top_k_ids(std::span<const double> z, std::size_t k);

/// Union of the top-K_orig ids of z and the top-K_blur ids of z_blur,
/// in ascending id order.
std::vector<TokenId> candidate_set(std::span<const double> z, std::span<const double> z_blur,
                                   std::size_t k_orig, std::size_t k_blur);

/// Mean audio ratio over the last min(L_attn, layers) decoder layers.
double audio_reliance(std::span<const double> ratios_per_layer, std::size_t l_attn);

/// Entropy of softmax(z) restricted to its top-k mass, divided by log k.
double topk_entropy(std::span<const double> z, std::size_t k);

/// min(gamma * r * entropy^alpha, 1). alpha = 0 disables the entropy factor
/// (0^0 is taken as 1).
double gate(double r_t, double entropy_hat, double gamma_gate, double alpha);

/// z + lambda * g * d_plus on omega; other coordinates untouched.
std::vector<double> apply_update(std::span<const double> z, std::span<const double> d_plus,
                                 std::span<const TokenId> omega, double lambda, double g);
/// Same rule with an unrectified contrast d.
std::vector<double> signed_update(std::span<const double> z, std::span<const double> d,
                                  std::span<const TokenId> omega, double lambda, double g);

/// Greedy choice; ties go to the lowest id.
TokenId argmax(std::span<const double> z);

struct FusedStep {
  std::vector<double> logits;
  GateTrace trace;
};

/// The complete step rule for a non-baseline strategy: contrast, candidate
/// set, reliance, entropy, gate, sparse update, greedy choice.
FusedStep fuse_logits(std::span<const double> z, std::span<const double> z_blur,
                      std::span<const double> ratios_per_layer, double lambda,
                      const DecodeConfig& config, std::size_t step_index);

/// Tab-separated key=value record; reals printed with 9 significant digits.
std::string format_gate_trace(const GateTrace& trace);
GateTrace parse_gate_trace(std::string_view line);

/// "%.9g" formatting used by every trace and report artifact.
std::string format_real(double v);

}  // namespace tcd
