#include "tcd/encoder_states.hpp"

#include <cmath>
#include <stdexcept>

namespace tcd {

void EncoderStates::validate() const {
  if (layers.empty()) throw std::invalid_argument("encoder states: no layers");
  const std::size_t frames = layers.front().size();
  if (frames == 0) throw std::invalid_argument("encoder states: no frames");
  const std::size_t d = layers.front().front().size();
  if (d == 0) throw std::invalid_argument("encoder states: zero-dimensional frames");
  for (const auto& layer : layers) {
    if (layer.size() != frames)
      throw std::invalid_argument("encoder states: layers disagree on frame count");
    for (const auto& frame : layer) {
      if (frame.size() != d)
        throw std::invalid_argument("encoder states: frames disagree on dimension");
      for (double v : frame)
        if (!std::isfinite(v)) throw std::invalid_argument("encoder states: non-finite value");
    }
  }
  if (!(frame_rate > 0.0)) throw std::invalid_argument("encoder states: frame_rate must be > 0");
}

}  // namespace tcd
