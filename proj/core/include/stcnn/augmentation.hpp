#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "stcnn/data_model.hpp"
#include "stcnn/rng.hpp"

namespace stcnn {

/// 2-D affine map on pixel-centre coordinates: (x, y) -> (a x + b y + tx, c x + d y + ty).
struct Affine {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;

  static Affine identity() { return {}; }
  /// Rotation (degrees, counter-clockwise on screen), uniform scale and
  /// optional horizontal mirror about (cx, cy), followed by a translation.
  static Affine similarity(double rotation_deg, double scale, double shift_x, double shift_y,
                           double cx, double cy, bool mirror = false);

  std::pair<double, double> apply(double x, double y) const {
    return {a * x + b * y + tx, c * x + d * y + ty};
  }
  Affine inverse() const;
  /// (*this)(other(p)).
  Affine after(const Affine& other) const;
  bool is_identity() const {
    return a == 1 && b == 0 && c == 0 && d == 1 && tx == 0 && ty == 0;
  }
};

/// Warps by inverse mapping. Frames sample bilinearly with edge clamp; masks
/// sample the nearest label, background outside the source.
Frame warp_frame(const Frame& frame, const Affine& forward);
Mask warp_mask(const Mask& mask, const Affine& forward);

struct GeometricParams {
  bool flip = false;
  double rotation_deg = 0.0;
  double scale = 1.0;
};

/// Applies the same flip / rotation / rescale about the image centre to both.
std::pair<Frame, Mask> apply_geometric(const Frame& frame, const Mask& mask,
                                       const GeometricParams& params);

/// Random flip (p = 0.5), rotation in [-10, 10] degrees, scale in [0.9, 1.1].
GeometricParams sample_geometric(Rng& rng);
std::pair<Frame, Mask> basic_augment(const Frame& frame, const Mask& mask, Rng& rng);

/// A similarity transform; translation in pixels.
struct MotionParams {
  double shift_x = 0.0;
  double shift_y = 0.0;
  double rotation_deg = 0.0;
  double scale = 1.0;

  bool is_identity() const {
    return shift_x == 0.0 && shift_y == 0.0 && rotation_deg == 0.0 && scale == 1.0;
  }
};

struct LucidParams {
  std::array<double, 3> gain{1.0, 1.0, 1.0};  // per channel, [0.7, 1.3]
  double gamma = 1.0;                          // [0.8, 1.2]
  MotionParams object;  // about the object's centroid
  MotionParams camera;  // about the image centre
  std::uint64_t seed = 0;

  static LucidParams identity() { return {}; }
  bool is_identity() const;
};

struct LucidRanges {
  double gain_min = 0.7, gain_max = 1.3;
  double gamma_min = 0.8, gamma_max = 1.2;
  double shift_fraction = 0.10;  // of width / height
  double rotation_deg = 15.0;
  double scale_min = 0.85, scale_max = 1.15;
};

/// Draws every parameter from its range with a generator seeded by `seed`.
LucidParams sample_lucid_params(std::uint64_t seed, int height, int width,
                                const LucidRanges& ranges = {});

/// Illumination in [0,1] intensity space: clip(gain_c * v^gamma).
Frame change_illumination(const Frame& frame, const std::array<double, 3>& gain,
                          double gamma);

/// Fills every pixel outside `valid` by repeated averaging of valid
/// 4-neighbours until no hole remains.
Frame fill_background(const Frame& frame, const Mask& valid_is_background);

struct LucidTransforms {
  Affine object;  // object motion
  Affine camera;  // global camera motion
  /// Forward map applied to foreground pixels: camera after object.
  Affine foreground() const { return camera.after(object); }
};

LucidTransforms lucid_transforms(const Mask& mask, const LucidParams& params);

/// Illumination, foreground/background split with hole filling, object
/// motion, camera motion, hard merge. The returned mask is the transformed
/// input mask. Throws ArgumentError when `mask0` has no foreground.
std::pair<Frame, Mask> lucid_synthesize(const Frame& frame0, const Mask& mask0,
                                        const LucidParams& params);

/// `count` training pairs; entry 0 is the input pair, the rest are lucid
/// syntheses (redrawn until the mask is non-empty) or, with `lucid` false,
/// basic augmentations.
std::vector<std::pair<Frame, Mask>> build_online_set(const Frame& frame0, const Mask& mask0,
                                                     int count, std::uint64_t seed,
                                                     bool lucid = true);

}  // namespace stcnn
