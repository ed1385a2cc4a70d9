#include "stcnn/augmentation.hpp"

#include <algorithm>
#include <cmath>

#include "stcnn/errors.hpp"

namespace stcnn {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double to_unit(double v) { return 0.5 * v + 0.5; }
double from_unit(double u) { return (u - 0.5) / 0.5; }

double sample_plane(const double* p, int h, int w, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = p[y0 * w + x0] * (1 - fx) + p[y0 * w + x1] * fx;
  const double bot = p[y1 * w + x0] * (1 - fx) + p[y1 * w + x1] * fx;
  return top * (1 - fy) + bot * fy;
}

std::uint8_t nearest_label(const Mask& m, double x, double y) {
  const int xi = static_cast<int>(std::floor(x + 0.5));
  const int yi = static_cast<int>(std::floor(y + 0.5));
  if (xi < 0 || yi < 0 || xi >= m.width() || yi >= m.height()) return 0;
  return m.at(yi, xi);
}

Affine motion_affine(const MotionParams& m, double cx, double cy) {
  return Affine::similarity(m.rotation_deg, m.scale, m.shift_x, m.shift_y, cx, cy);
}

void check_pair(const Frame& f, const Mask& m) {
  if (f.height() != m.height() || f.width() != m.width()) {
    throw ShapeError("frame and mask sizes differ");
  }
}

}  // namespace

Affine Affine::similarity(double rotation_deg, double scale, double shift_x, double shift_y,
                          double cx, double cy, bool mirror) {
  // On screen (y down) a counter-clockwise rotation by t maps
  // (x, y) -> (x cos t + y sin t, -x sin t + y cos t).
  const double t = rotation_deg * kDegToRad;
  const double cs = rotation_deg == 0.0 ? 1.0 : std::cos(t);
  const double sn = rotation_deg == 0.0 ? 0.0 : std::sin(t);
  const double m = mirror ? -1.0 : 1.0;
  Affine r;
  r.a = scale * cs * m;
  r.b = scale * sn;
  r.c = -scale * sn * m;
  r.d = scale * cs;
  r.tx = cx - (r.a * cx + r.b * cy) + shift_x;
  r.ty = cy - (r.c * cx + r.d * cy) + shift_y;
  return r;
}

Affine Affine::inverse() const {
  const double det = a * d - b * c;
  if (det == 0.0) throw ArgumentError("singular affine map");
  Affine r;
  r.a = d / det;
  r.b = -b / det;
  r.c = -c / det;
  r.d = a / det;
  r.tx = -(r.a * tx + r.b * ty);
  r.ty = -(r.c * tx + r.d * ty);
  return r;
}

Affine Affine::after(const Affine& o) const {
  Affine r;
  r.a = a * o.a + b * o.c;
  r.b = a * o.b + b * o.d;
  r.c = c * o.a + d * o.c;
  r.d = c * o.b + d * o.d;
  r.tx = a * o.tx + b * o.ty + tx;
  r.ty = c * o.tx + d * o.ty + ty;
  return r;
}

Frame warp_frame(const Frame& frame, const Affine& forward) {
  if (forward.is_identity()) return frame;
  const Affine inv = forward.inverse();
  const int h = frame.height(), w = frame.width();
  Tensor out({1, 3, h, w});
  for (int ch = 0; ch < 3; ++ch) {
    const double* src = frame.pixels().plane(0, ch);
    double* dst = out.plane(0, ch);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto [sx, sy] = inv.apply(x, y);
        dst[y * w + x] = sample_plane(src, h, w, sx, sy);
      }
    }
  }
  return Frame(std::move(out));
}

Mask warp_mask(const Mask& mask, const Affine& forward) {
  if (forward.is_identity()) return mask;
  const Affine inv = forward.inverse();
  const int h = mask.height(), w = mask.width();
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sx, sy] = inv.apply(x, y);
      labels[y * w + x] = nearest_label(mask, sx, sy);
    }
  }
  return Mask(h, w, std::move(labels), mask.is_ground_truth());
}

std::pair<Frame, Mask> apply_geometric(const Frame& frame, const Mask& mask,
                                       const GeometricParams& p) {
  check_pair(frame, mask);
  const double cx = 0.5 * (frame.width() - 1);
  const double cy = 0.5 * (frame.height() - 1);
  const Affine fwd = Affine::similarity(p.rotation_deg, p.scale, 0, 0, cx, cy, p.flip);
  return {warp_frame(frame, fwd), warp_mask(mask, fwd)};
}

GeometricParams sample_geometric(Rng& rng) {
  GeometricParams p;
  p.flip = rng.bernoulli(0.5);
  p.rotation_deg = rng.uniform(-10.0, 10.0);
  p.scale = rng.uniform(0.9, 1.1);
  return p;
}

std::pair<Frame, Mask> basic_augment(const Frame& frame, const Mask& mask, Rng& rng) {
  return apply_geometric(frame, mask, sample_geometric(rng));
}

bool LucidParams::is_identity() const {
  return gain[0] == 1.0 && gain[1] == 1.0 && gain[2] == 1.0 && gamma == 1.0 &&
         object.is_identity() && camera.is_identity();
}

LucidParams sample_lucid_params(std::uint64_t seed, int height, int width,
                                const LucidRanges& r) {
  Rng rng(seed);
  LucidParams p;
  p.seed = seed;
  for (double& g : p.gain) g = rng.uniform(r.gain_min, r.gain_max);
  p.gamma = rng.uniform(r.gamma_min, r.gamma_max);
  for (MotionParams* m : {&p.object, &p.camera}) {
    m->shift_x = rng.uniform(-r.shift_fraction, r.shift_fraction) * width;
    m->shift_y = rng.uniform(-r.shift_fraction, r.shift_fraction) * height;
    m->rotation_deg = rng.uniform(-r.rotation_deg, r.rotation_deg);
    m->scale = rng.uniform(r.scale_min, r.scale_max);
  }
  return p;
}

Frame change_illumination(const Frame& frame, const std::array<double, 3>& gain,
                          double gamma) {
  if (gain[0] == 1.0 && gain[1] == 1.0 && gain[2] == 1.0 && gamma == 1.0) return frame;
  Tensor out = frame.pixels();
  const std::size_t hw = out.shape().plane();
  for (int ch = 0; ch < 3; ++ch) {
    double* p = out.plane(0, ch);
    for (std::size_t i = 0; i < hw; ++i) {
      const double u = std::clamp(to_unit(p[i]), 0.0, 1.0);
      const double lit = gamma == 1.0 ? u : std::pow(u, gamma);
      p[i] = from_unit(std::clamp(gain[ch] * lit, 0.0, 1.0));
    }
  }
  return Frame(std::move(out));
}

Frame fill_background(const Frame& frame, const Mask& background) {
  check_pair(frame, background);
  const int h = frame.height(), w = frame.width();
  std::vector<std::uint8_t> valid(background.labels());
  if (std::none_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; })) {
    throw ArgumentError("background fill needs at least one background pixel");
  }
  Tensor out = frame.pixels();
  std::vector<std::size_t> frontier;
  std::vector<std::array<double, 3>> values;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (;;) {
    frontier.clear();
    values.clear();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (valid[i]) continue;
        std::array<double, 3> acc{0, 0, 0};
        int n = 0;
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (!valid[j]) continue;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += out.plane(0, ch)[j];
          ++n;
        }
        if (n == 0) continue;
        for (double& v : acc) v /= n;
        frontier.push_back(i);
        values.push_back(acc);
      }
    }
    if (frontier.empty()) break;
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      for (int ch = 0; ch < 3; ++ch) out.plane(0, ch)[frontier[k]] = values[k][ch];
      valid[frontier[k]] = 1;
    }
  }
  return Frame(std::move(out));
}

LucidTransforms lucid_transforms(const Mask& mask, const LucidParams& p) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(y, x)) {
        sx += x;
        sy += y;
        ++n;
      }
    }
  }
  if (n == 0) throw ArgumentError("lucid synthesis needs a non-empty foreground");
  LucidTransforms t;
  if (!p.object.is_identity()) {
    t.object = motion_affine(p.object, sx / n, sy / n);
  }
  if (!p.camera.is_identity()) {
    t.camera = motion_affine(p.camera, 0.5 * (mask.width() - 1), 0.5 * (mask.height() - 1));
  }
  return t;
}

std::pair<Frame, Mask> lucid_synthesize(const Frame& frame0, const Mask& mask0,
                                        const LucidParams& params) {
  check_pair(frame0, mask0);
  const LucidTransforms t = lucid_transforms(mask0, params);
  if (params.is_identity()) return {frame0, mask0};

  // 1. illumination on the whole frame
  const Frame lit = change_illumination(frame0, params.gain, params.gamma);
  // 2. split; the background hole is filled from its surroundings
  std::vector<std::uint8_t> bg_labels(mask0.labels());
  for (auto& v : bg_labels) v = v ? 0 : 1;
  const Mask background(mask0.height(), mask0.width(), std::move(bg_labels));
  const bool has_background = background.foreground_count() > 0;
  const Frame filled = has_background ? fill_background(lit, background) : lit;
  // 3-4. object motion on the foreground layer, camera motion on both layers
  const Affine fg_map = t.foreground();
  const Frame fg = warp_frame(lit, fg_map);
  const Mask mask = warp_mask(mask0, fg_map);
  const Frame bg = warp_frame(filled, t.camera);
  // 5. merge
  Tensor out = bg.pixels();
  const std::size_t hw = out.shape().plane();
  for (int ch = 0; ch < 3; ++ch) {
    const double* f = fg.pixels().plane(0, ch);
    double* o = out.plane(0, ch);
    for (std::size_t i = 0; i < hw; ++i) {
      if (mask.labels()[i]) o[i] = f[i];
    }
  }
  return {Frame(std::move(out)), mask.with_ground_truth(mask0.is_ground_truth())};
}

std::vector<std::pair<Frame, Mask>> build_online_set(const Frame& frame0, const Mask& mask0,
                                                     int count, std::uint64_t seed,
                                                     bool lucid) {
  if (count < 1) throw ArgumentError("online set count must be >= 1");
  check_pair(frame0, mask0);
  std::vector<std::pair<Frame, Mask>> out;
  out.reserve(count);
  out.emplace_back(frame0, mask0);
  Rng rng(seed);
  while (static_cast<int>(out.size()) < count) {
    if (lucid) {
      if (mask0.foreground_count() == 0) {
        throw ArgumentError("lucid synthesis needs a non-empty foreground");
      }
      auto pair = lucid_synthesize(
          frame0, mask0, sample_lucid_params(rng.next_u64(), frame0.height(), frame0.width()));
      if (pair.second.foreground_count() == 0) continue;
      out.push_back(std::move(pair));
    } else {
      out.push_back(basic_augment(frame0, mask0, rng));
    }
  }
  return out;
}

}  // namespace stcnn
