#include "tcd/stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcd {

namespace {

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double diff_norm(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

double interpolate(double s, double lo, double hi, const char* what) {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::invalid_argument(std::string(what) + ": stability must lie in [0, 1]");
  if (!(lo <= hi)) throw std::invalid_argument(std::string(what) + ": bounds out of order");
  return std::clamp(lo + (hi - lo) * s, lo, hi);
}

}  // namespace

LayerStats layer_stats(const FrameSequence& frames) {
  if (frames.size() < 2) throw std::invalid_argument("layer_stats: need at least two frames");
  LayerStats stats;
  for (const auto& f : frames) stats.magnitude += norm(f);
  stats.magnitude /= static_cast<double>(frames.size());
  for (std::size_t t = 1; t < frames.size(); ++t) {
    if (frames[t].size() != frames[t - 1].size())
      throw std::invalid_argument("layer_stats: frames disagree on dimension");
    stats.flux += diff_norm(frames[t], frames[t - 1]);
  }
  stats.flux /= static_cast<double>(frames.size() - 1);
  return stats;
}

double layer_stability(double magnitude, double flux, double epsilon) {
  if (!(magnitude >= 0.0) || !(flux >= 0.0))
    throw std::invalid_argument("layer_stability: magnitude and flux must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("layer_stability: epsilon must be > 0");
  return magnitude / (magnitude + flux + epsilon);
}

PooledStability pool_stability(std::span<const double> stability, std::span<const double> ratios,
                               double tau) {
  if (stability.empty()) throw std::invalid_argument("pool_stability: no layers");
  if (stability.size() != ratios.size())
    throw std::invalid_argument("pool_stability: stability and ratio lists differ in length");
  if (!std::isfinite(tau)) throw std::invalid_argument("pool_stability: tau must be finite");

  PooledStability out;
  out.weights.resize(ratios.size());
  const double top = tau * *std::max_element(ratios.begin(), ratios.end());
  const double bottom = tau * *std::min_element(ratios.begin(), ratios.end());
  const double shift = tau >= 0.0 ? top : bottom;
  double total = 0.0;
  for (std::size_t l = 0; l < ratios.size(); ++l) {
    out.weights[l] = std::exp(tau * ratios[l] - shift);
    total += out.weights[l];
  }
  for (std::size_t l = 0; l < ratios.size(); ++l) {
    out.weights[l] /= total;
    out.pooled += out.weights[l] * stability[l];
  }
  const auto [lo, hi] = std::minmax_element(stability.begin(), stability.end());
  out.pooled = std::clamp(out.pooled, *lo, *hi);
  return out;
}

double map_window(double pooled, double w_min, double w_max) {
  return interpolate(pooled, w_min, w_max, "map_window");
}

double map_scale(double pooled, double lambda_min, double lambda_max) {
  return interpolate(pooled, lambda_min, lambda_max, "map_scale");
}

std::vector<double> match_layer_ratios(std::span<const double> decoder_ratios,
                                       std::size_t encoder_layers) {
  if (decoder_ratios.empty()) throw std::invalid_argument("match_layer_ratios: no decoder layers");
  const std::size_t dec = decoder_ratios.size();
  std::vector<double> out(encoder_layers);
  for (std::size_t e = 0; e < encoder_layers; ++e) {
    // depth (e + 1) / encoder_layers, mapped onto 1..dec
    const double depth = static_cast<double>(e + 1) / static_cast<double>(encoder_layers);
    auto j = static_cast<std::size_t>(std::llround(depth * static_cast<double>(dec)));
    j = std::clamp<std::size_t>(j, 1, dec);
    out[e] = decoder_ratios[j - 1];
  }
  return out;
}

StabilityReport estimate_stability(const EncoderStates& states,
                                   std::span<const double> decoder_ratios,
                                   const StabilityParams& params) {
  states.validate();
  StabilityReport report;
  std::vector<double> per_layer;
  for (const auto& layer : states.layers) {
    const auto stats = layer_stats(layer);
    LayerStability entry;
    entry.magnitude = stats.magnitude;
    entry.flux = stats.flux;
    entry.stability = layer_stability(stats.magnitude, stats.flux, params.epsilon);
    per_layer.push_back(entry.stability);
    report.per_layer.push_back(entry);
  }
  const auto ratios = match_layer_ratios(decoder_ratios, states.num_layers());
  const auto pooled = pool_stability(per_layer, ratios, params.tau);
  for (std::size_t l = 0; l < report.per_layer.size(); ++l)
    report.per_layer[l].weight = pooled.weights[l];
  report.pooled = pooled.pooled;
  report.window_ms = map_window(report.pooled, params.w_min, params.w_max);
  report.lambda = map_scale(report.pooled, params.lambda_min, params.lambda_max);
  return report;
}

}  // namespace tcd
