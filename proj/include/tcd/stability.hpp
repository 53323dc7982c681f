#pragma once

#include <span>
#include <vector>

#include "tcd/encoder_states.hpp"

namespace tcd {

struct LayerStats {
  double magnitude = 0.0;  // mean frame norm
  double flux = 0.0;       // mean norm of consecutive differences
};

struct LayerStability {
  double magnitude = 0.0;
  double flux = 0.0;
  double stability = 0.0;
  double weight = 0.0;
};

struct StabilityReport {
  std::vector<LayerStability> per_layer;
  double pooled = 0.0;
  double window_ms = 0.0;
  double lambda = 0.0;
};

struct PooledStability {
  double pooled = 0.0;
  std::vector<double> weights;
};

/// Needs at least two frames.
LayerStats layer_stats(const FrameSequence& frames);

/// M / (M + F + epsilon).
double layer_stability(double magnitude, double flux, double epsilon);

/// Softmax(tau * r) weighting of per-layer stability.
PooledStability pool_stability(std::span<const double> stability, std::span<const double> ratios,
                               double tau);

double map_window(double pooled, double w_min, double w_max);
double map_scale(double pooled, double lambda_min, double lambda_max);

/// Picks, for each of `encoder_layers` layers, the decoder layer at the same
/// normalized depth and returns its audio ratio.
std::vector<double> match_layer_ratios(std::span<const double> decoder_ratios,
                                       std::size_t encoder_layers);

struct StabilityParams {
  double epsilon = 1e-6;
  double tau = 4.0;
  double w_min = 8.0;
  double w_max = 30.0;
  double lambda_min = 0.3;
  double lambda_max = 1.5;
};

/// Full per-example estimate from the original-view encoder states and the
/// decoder-layer audio ratios of the original-view prefill.
StabilityReport estimate_stability(const EncoderStates& states,
                                   std::span<const double> decoder_ratios,
                                   const StabilityParams& params);

}  // namespace tcd
