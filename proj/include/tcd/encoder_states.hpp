#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tcd {

using Frame = std::vector<double>;
using FrameSequence = std::vector<Frame>;

/// Layered encoder output: layers[l][tau] is the latent vector of frame tau
/// at encoder layer l.
struct EncoderStates {
  std::vector<FrameSequence> layers;
  double frame_rate = 50.0;
  /// Branch label ("orig" or "slow") attached by the decoding engine. Table
  /// driven backends key their lookups on it; real encoders ignore it.
  std::string view = "orig";

  std::size_t num_layers() const { return layers.size(); }
  std::size_t num_frames() const { return layers.empty() ? 0 : layers.front().size(); }
  std::size_t dim() const {
    return (layers.empty() || layers.front().empty()) ? 0 : layers.front().front().size();
  }

  /// Throws std::invalid_argument unless every layer has the same L >= 1
  /// frames of the same dimension d >= 1 with finite values.
  void validate() const;
};

}  // namespace tcd
