#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the code paths it checks; formulas are written out directly.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "tcd/encoder_states.hpp"
#include "tcd/fusion.hpp"
#include "tcd/signal.hpp"
#include "tcd/toy_model.hpp"
#include "tcd/vocab.hpp"

namespace oracle {

/// sin^2(pi k / (N - 1)), normalized; N odd.
inline std::vector<double> hann(std::size_t n) {
  if (n == 1) return {1.0};
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n - 1));
    w[k] = s * s;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

/// Direct weighted sum over every in-range neighbour j of i, renormalized.
inline std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& w) {
  const long c = static_cast<long>(w.size() / 2);
  const long n = static_cast<long>(x.size());
  std::vector<double> y(x.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0, mass = 0.0;
    for (long j = 0; j < n; ++j) {
      const long k = j - i + c;
      if (k < 0 || k >= static_cast<long>(w.size())) continue;
      acc += w[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j)];
      mass += w[static_cast<std::size_t>(k)];
    }
    y[static_cast<std::size_t>(i)] = acc / mass;
  }
  return y;
}

inline double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

/// Energy in DFT bins at or above `cutoff_hz` (naive O(n^2) DFT).
inline double band_energy_above(const std::vector<double>& x, double rate, double cutoff_hz) {
  const std::size_t n = x.size();
  double total = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double freq = rate * static_cast<double>(k) / static_cast<double>(n);
    if (freq < cutoff_hz) continue;
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
    total += std::norm(acc);
  }
  return total;
}

inline tcd::EncoderStates random_states(std::uint64_t seed, std::size_t layers, std::size_t frames,
                                        std::size_t dim, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  tcd::EncoderStates s;
  s.layers.assign(layers, tcd::FrameSequence(frames, tcd::Frame(dim)));
  for (auto& layer : s.layers)
    for (auto& f : layer)
      for (double& v : f) v = scale * u(gen);
  return s;
}

inline std::vector<double> random_logits(std::mt19937_64& gen, std::size_t n, double scale = 3.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> z(n);
  for (double& v : z) v = dist(gen);
  return z;
}

/// Blur of one layer: h~_t = sum_j K(t, j) h_j with K the Hann tap weights
/// restricted to in-range j and renormalized.
inline tcd::FrameSequence blur_layer(const tcd::FrameSequence& h, std::size_t taps) {
  if (taps % 2 == 0) ++taps;
  const auto w = hann(taps);
  const long c = static_cast<long>(taps / 2);
  const long n = static_cast<long>(h.size());
  tcd::FrameSequence out(h.size(), tcd::Frame(h[0].size(), 0.0));
  for (long t = 0; t < n; ++t) {
    double mass = 0.0;
    for (long j = std::max(0L, t - c); j <= std::min(n - 1, t + c); ++j) mass += w[static_cast<std::size_t>(j - t + c)];
    for (long j = std::max(0L, t - c); j <= std::min(n - 1, t + c); ++j)
      for (std::size_t i = 0; i < h[0].size(); ++i)
        out[static_cast<std::size_t>(t)][i] += w[static_cast<std::size_t>(j - t + c)] / mass * h[static_cast<std::size_t>(j)][i];
  }
  return out;
}

struct MF {
  double m, f;
};

inline MF magnitude_flux(const tcd::FrameSequence& h) {
  double m = 0.0, f = 0.0;
  for (std::size_t t = 0; t < h.size(); ++t) {
    double sq = 0.0;
    for (double v : h[t]) sq += v * v;
    m += std::sqrt(sq);
    if (t > 0) {
      double d = 0.0;
      for (std::size_t i = 0; i < h[t].size(); ++i) d += (h[t][i] - h[t - 1][i]) * (h[t][i] - h[t - 1][i]);
      f += std::sqrt(d);
    }
  }
  return {m / static_cast<double>(h.size()), f / static_cast<double>(h.size() - 1)};
}

/// Ids sorted by descending value then ascending id, via a full stable sort.
inline std::vector<int> ranking(const std::vector<double>& z) {
  std::vector<int> ids(z.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return z[a] > z[b]; });
  return ids;
}

/// Full-vocabulary softmax, keep the k largest probabilities, renormalize,
/// entropy / ln k.
inline double topk_entropy(const std::vector<double>& z, std::size_t k) {
  double peak = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) total += (p[j] = std::exp(z[j] - peak));
  for (double& v : p) v /= total;
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  sorted.resize(k);
  const double mass = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  double h = 0.0;
  for (double v : sorted) {
    const double q = v / mass;
    if (q > 0.0) h -= q * std::log(q);
  }
  return h / std::log(static_cast<double>(k));
}

struct StepParams {
  std::size_t k_orig = 16, k_blur = 8, k_ent = 5, l_attn = 4;
  double gamma = 2.0, alpha = 0.5, lambda = 1.0;
  bool signed_update = false;
  bool gate_fixed = false;
};

struct StepResult {
  int chosen = 0;
  double gate = 0.0;
  std::vector<double> fused;
  std::vector<int> omega;
};

/// The whole fused step in one function: candidates from both rankings,
/// reliance over the last l_attn layers, top-k entropy, gate, update on the
/// candidates only, greedy pick with lowest-id ties.
inline StepResult tcd_step(const std::vector<double>& z, const std::vector<double>& zb,
                           const std::vector<double>& ratios, const StepParams& p) {
  StepResult r;
  const auto rank_z = ranking(z);
  const auto rank_b = ranking(zb);
  std::vector<bool> in_omega(z.size(), false);
  for (std::size_t i = 0; i < std::min(p.k_orig, z.size()); ++i) in_omega[rank_z[i]] = true;
  for (std::size_t i = 0; i < std::min(p.k_blur, z.size()); ++i) in_omega[rank_b[i]] = true;
  for (std::size_t j = 0; j < z.size(); ++j)
    if (in_omega[j]) r.omega.push_back(static_cast<int>(j));

  const std::size_t layers = std::min(p.l_attn, ratios.size());
  double rt = 0.0;
  for (std::size_t i = ratios.size() - layers; i < ratios.size(); ++i) rt += ratios[i];
  rt /= static_cast<double>(layers);
  const double h = topk_entropy(z, p.k_ent);
  const double hf = p.alpha == 0.0 ? 1.0 : std::pow(h, p.alpha);
  r.gate = p.gate_fixed ? 1.0 : std::min(p.gamma * rt * hf, 1.0);

  r.fused = z;
  for (int j : r.omega) {
    double d = z[j] - zb[j];
    if (!p.signed_update) d = std::max(d, 0.0);
    r.fused[j] = z[j] + p.lambda * r.gate * d;
  }
  r.chosen = 0;
  for (std::size_t j = 1; j < r.fused.size(); ++j)
    if (r.fused[j] > r.fused[r.chosen]) r.chosen = static_cast<int>(j);
  return r;
}


struct Pooled {
  double s = 0.0, window_ms = 0.0, lambda = 0.0;
};

/// Stability from states and per-layer ratios, layers matched one to one.
inline Pooled stability(const tcd::EncoderStates& h, const std::vector<double>& ratios,
                        double tau = 4.0, double eps = 1e-6) {
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < h.layers.size(); ++l) {
    const auto mf = magnitude_flux(h.layers[l]);
    const double e = std::exp(tau * ratios[l]);
    num += e * mf.m / (mf.m + mf.f + eps);
    den += e;
  }
  Pooled p;
  p.s = num / den;
  p.window_ms = 8.0 + (30.0 - 8.0) * p.s;
  p.lambda = 0.3 + (1.5 - 0.3) * p.s;
  return p;
}

/// Greedy decoding on the toy model that recomputes the whole sequence for
/// both views at every step (no cache, no session).
inline std::vector<tcd::TokenId> reference_decode(const tcd::ToyModel& model, const tcd::Waveform& x,
                                                  std::vector<tcd::TokenId> tokens, tcd::Strategy strategy,
                                                  std::size_t max_tokens, double noise_sigma = 0.02,
                                                  std::uint64_t seed = 0) {
  const auto h = model.encode(x);
  const auto prompt_full = model.forward_full(h, tokens);
  std::vector<double> ratios(model.num_decoder_layers(), 0.0);
  for (const auto& o : prompt_full)
    for (std::size_t l = 0; l < ratios.size(); ++l) ratios[l] += o.attn_audio_ratio_per_layer[l] / static_cast<double>(prompt_full.size());
  const auto pooled = stability(h, ratios);

  tcd::EncoderStates slow;
  if (strategy == tcd::Strategy::tcd_noise_ref) slow = model.encode(tcd::noise_reference(x, noise_sigma, seed));
  else if (strategy != tcd::Strategy::baseline) slow = model.encode(tcd::blur_waveform(x, pooled.window_ms));

  StepParams params;
  params.lambda = pooled.lambda;
  params.signed_update = strategy == tcd::Strategy::tcd_signed;
  params.gate_fixed = strategy == tcd::Strategy::tcd_no_gate;

  std::vector<tcd::TokenId> out;
  for (std::size_t i = 0; i < max_tokens; ++i) {
    const auto z = model.forward_full(h, tokens).back();
    int chosen;
    if (strategy == tcd::Strategy::baseline) {
      chosen = ranking(z.logits)[0];
    } else {
      const auto zb = model.forward_full(slow, tokens).back();
      chosen = tcd_step(z.logits, zb.logits, z.attn_audio_ratio_per_layer, params).chosen;
    }
    out.push_back(chosen);
    tokens.push_back(chosen);
    if (chosen == tcd::vocab::kEos) break;
  }
  return out;
}

}  // namespace oracle
