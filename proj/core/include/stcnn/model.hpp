#pragma once

#include <array>
#include <cstdint>

#include "stcnn/params.hpp"

namespace stcnn {

/// Channel widths and depths for one scale profile.
struct ArchSpec {
  // Temporal coherence branch (generator). Encoder stages sit at strides
  // 2, 4, 8, 16; each is a stride-2 conv followed by `gen_units` residual units.
  std::array<int, 4> gen_enc;
  int gen_units;
  int gen_compact;             // width of the 1x1 skip compaction convs
  std::array<int, 3> gen_dec;  // deconvolution output widths (1/8, 1/4, 1/2)

  // Discriminator: four stride-2 conv stages, then global pooling + 2-class FC.
  std::array<int, 4> disc;

  // Spatial segmentation branch.
  int sp_stem;                  // stride 2
  std::array<int, 2> sp_stage;  // strides 4, 8
  int sp_deep;                  // the two dilated stages (dilation 2 and 4)
  int sp_units;
  int ppm_reduce;
  int att_width;

  /// Channels of the exported temporal pyramid at strides 4, 8, 16.
  std::array<int, 3> pyramid_channels() const {
    return {gen_dec[1] + gen_compact, gen_dec[0] + gen_compact, gen_enc[3]};
  }
};

ArchSpec arch_for(ScaleProfile profile);

inline constexpr int kPpmBins[] = {1, 2, 3, 6};
inline constexpr int kGeneratorStride = 16;
inline constexpr int kSpatialStride = 8;

struct ModelOptions {
  ScaleProfile profile = ScaleProfile::Tiny;
  int delta = 4;
  std::uint64_t seed = 0;
  bool attention = true;  // mask-guided attention gating
  bool temporal = true;   // temporal branch features feed the spatial branch
};

/// Freshly initialised generator, discriminator and spatial-branch arrays.
/// Each group draws from its own stream derived from `seed`.
ParameterStore init_parameters(const ModelOptions& options);

}  // namespace stcnn
