#include "stcnn/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "stcnn/errors.hpp"
#include "stcnn/rng.hpp"

namespace stcnn {

namespace {

using Rgb = std::array<double, 3>;

double luma(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

Rgb random_color(Rng& rng) {
  return {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
}

std::uint8_t to_byte(double u) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
}

}  // namespace

VideoSequence make_moving_square(const std::string& name, int frames, int height, int width,
                                 std::uint64_t seed) {
  if (frames < 1) throw ArgumentError("synthetic sequence needs >= 1 frame");
  if (height < kMinSide || width < kMinSide) throw ArgumentError("synthetic frame too small");
  Rng rng(seed);
  const Rgb bg = random_color(rng);
  Rgb fg = random_color(rng);
  while (std::abs(luma(fg) - luma(bg)) < 0.3) fg = random_color(rng);
  const double freq_x = rng.uniform(0.05, 0.25), freq_y = rng.uniform(0.05, 0.25);
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  const int side_lo = std::max(3, std::min(height, width) / 4);
  const int side_hi = std::max(side_lo, std::min(height, width) * 3 / 8);
  const int side = rng.uniform_int(side_lo, side_hi);
  double px = rng.uniform(0.0, width - side), py = rng.uniform(0.0, height - side);
  double vx = rng.uniform(-2.5, 2.5), vy = rng.uniform(-2.5, 2.5);

  VideoSequence seq;
  seq.name = name;
  for (int t = 0; t < frames; ++t) {
    RawImage img{width, height, 3, std::vector<std::uint8_t>(std::size_t(width) * height * 3)};
    std::vector<std::uint8_t> labels(std::size_t(width) * height, 0);
    const int x0 = static_cast<int>(std::lround(px)), y0 = static_cast<int>(std::lround(py));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t i = std::size_t(y) * width + x;
        const bool inside = x >= x0 && x < x0 + side && y >= y0 && y < y0 + side;
        const double texture = 0.12 * std::sin(freq_x * x + freq_y * y + phase);
        for (int c = 0; c < 3; ++c) {
          const double noise = 0.02 * rng.normal();
          const double v = inside ? fg[c] + noise : bg[c] + texture + noise;
          img.pixels[i * 3 + c] = to_byte(v);
        }
        labels[i] = inside ? 1 : 0;
      }
    }
    seq.frames.push_back(Frame::from_rgb8(img));
    seq.gt_masks.emplace_back(Mask(height, width, std::move(labels), true));
    seq.stems.push_back(frame_stem(t));
    px += vx;
    py += vy;
    if (px < 0) px = -px, vx = -vx;
    if (py < 0) py = -py, vy = -vy;
    if (px > width - side) px = 2.0 * (width - side) - px, vx = -vx;
    if (py > height - side) py = 2.0 * (height - side) - py, vy = -vy;
  }
  return seq;
}

std::vector<VideoSequence> make_synthetic_dataset(const SyntheticOptions& o) {
  if (o.sequences < 1) throw ArgumentError("synthetic dataset needs >= 1 sequence");
  Rng master(o.seed);
  std::vector<VideoSequence> out;
  for (int s = 0; s < o.sequences; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "square%02d", s);
    out.push_back(make_moving_square(name, o.frames, o.height, o.width, master.next_u64()));
  }
  return out;
}

}  // namespace stcnn
