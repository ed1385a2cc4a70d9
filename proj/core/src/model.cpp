#include "stcnn/model.hpp"

#include "stcnn/errors.hpp"
#include "stcnn/rng.hpp"
#include "stcnn/spatial.hpp"
#include "stcnn/temporal.hpp"

namespace stcnn {

ArchSpec arch_for(ScaleProfile profile) {
  switch (profile) {
    case ScaleProfile::Tiny:
      return ArchSpec{{8, 12, 16, 24}, 1, 4, {16, 12, 8}, {8, 16, 16, 32},
                      8, {16, 24}, 24, 1, 6, 16};
    case ScaleProfile::Small:
      return ArchSpec{{16, 24, 32, 48}, 2, 8, {32, 24, 16}, {16, 32, 32, 64},
                      16, {24, 32}, 48, 2, 12, 24};
    case ScaleProfile::Full:
      return ArchSpec{{64, 128, 256, 512}, 6, 32, {256, 128, 64}, {32, 64, 128, 256},
                      64, {128, 256}, 512, 6, 128, 64};
  }
  throw ArgumentError("unknown scale profile");
}

ParameterStore init_parameters(const ModelOptions& options) {
  if (options.delta < 1) throw ArgumentError("delta must be >= 1");
  ParameterStore ps;
  ps.profile = options.profile;
  ps.delta = options.delta;
  ps.seed = options.seed;
  ps.attention = options.attention;
  ps.temporal = options.temporal;
  const ArchSpec arch = arch_for(options.profile);
  Rng root(options.seed);
  Rng gen_rng = root.fork();
  Rng disc_rng = root.fork();
  Rng spatial_rng = root.fork();
  init_generator(ps, arch, options.delta, gen_rng);
  init_discriminator(ps, arch, disc_rng);
  init_spatial(ps, arch, spatial_rng);
  return ps;
}

}  // namespace stcnn
