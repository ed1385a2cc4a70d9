#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcnn/data_model.hpp"

namespace stcnn {

/// Moving-square clips: a textured background with one solid square that
/// travels at constant velocity and bounces off the borders. Every frame
/// carries its ground-truth mask. Pixel values are 8-bit representable.
struct SyntheticOptions {
  int sequences = 16;
  int frames = 12;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
};

VideoSequence make_moving_square(const std::string& name, int frames, int height, int width,
                                 std::uint64_t seed);

/// Sequences named "square00", "square01", ...
std::vector<VideoSequence> make_synthetic_dataset(const SyntheticOptions& options);

}  // namespace stcnn
