#include "stcnn/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "stcnn/autograd.hpp"
#include "stcnn/errors.hpp"

namespace stcnn {

namespace fs = std::filesystem;

std::uint8_t denormalize_pixel(double v) {
  const double u = std::clamp((v * 0.5 + 0.5) * 255.0, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::lround(u));
}

// ---------------------------------------------------------------------------
// Frame

Frame::Frame(Tensor pixels) : pixels_(std::move(pixels)) {
  const Shape& s = pixels_.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("frame must be (1,3,H,W), got " + s.str());
  if (s.h < kMinSide || s.w < kMinSide) {
    throw ShapeError("frame smaller than 8x8: " + s.str());
  }
  if (!pixels_.all_finite()) throw ArgumentError("frame holds non-finite values");
}

Frame Frame::from_rgb8(const RawImage& image) {
  if (image.channels != 3) throw FormatError("frame image must be RGB");
  Tensor t({1, 3, image.height, image.width});
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * image.width + x) * 3;
      for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = normalize_pixel(image.pixels[base + c]);
    }
  }
  return Frame(std::move(t));
}

RawImage Frame::to_rgb8() const {
  RawImage img{width(), height(), 3, {}};
  img.pixels.resize(static_cast<std::size_t>(width()) * height() * 3);
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * width() + x) * 3;
      for (int c = 0; c < 3; ++c) img.pixels[base + c] = denormalize_pixel(at(c, y, x));
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Mask

Mask::Mask(int height, int width, std::vector<std::uint8_t> labels, bool is_ground_truth)
    : height_(height), width_(width), labels_(std::move(labels)),
      is_ground_truth_(is_ground_truth) {
  if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
  if (labels_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("mask label count does not match dimensions");
  }
  for (auto v : labels_) {
    if (v > 1) throw ArgumentError("mask labels must be 0 or 1");
  }
}

Mask Mask::from_gray8(const RawImage& image, bool is_ground_truth) {
  if (image.channels != 1) throw FormatError("mask image must be single-channel");
  std::vector<std::uint8_t> labels(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), labels.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v != 0); });
  return Mask(image.height, image.width, std::move(labels), is_ground_truth);
}

RawImage Mask::to_gray8() const {
  RawImage img{width_, height_, 1, labels_};
  for (auto& v : img.pixels) v = v ? 255 : 0;
  return img;
}

std::size_t Mask::foreground_count() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1));
}

Tensor Mask::to_tensor() const {
  Tensor t({1, 1, height_, width_});
  for (std::size_t i = 0; i < labels_.size(); ++i) t[i] = labels_[i];
  return t;
}

// ---------------------------------------------------------------------------
// Sequences

void VideoSequence::validate() const {
  if (frames.empty()) throw EmptySequence("sequence '" + name + "' has no frames");
  const int h = frames.front().height(), w = frames.front().width();
  for (const auto& f : frames) {
    if (f.height() != h || f.width() != w) {
      throw FormatError("sequence '" + name + "' mixes frame sizes");
    }
  }
  if (!gt_masks.empty()) {
    if (gt_masks.size() != frames.size()) {
      throw FormatError("sequence '" + name + "' mask list not aligned with frames");
    }
    for (const auto& m : gt_masks) {
      if (m && (m->height() != h || m->width() != w)) {
        throw FormatError("sequence '" + name + "' mask size differs from frames");
      }
    }
  }
  if (!stems.empty() && stems.size() != frames.size()) {
    throw FormatError("sequence '" + name + "' stem list not aligned with frames");
  }
}

VideoSequence VideoSequence::truncated(int last) const {
  if (last < 0 || last >= size()) throw ArgumentError("truncation index out of range");
  VideoSequence out;
  out.name = name;
  const auto end = static_cast<std::ptrdiff_t>(last + 1);
  out.frames.assign(frames.begin(), frames.begin() + end);
  if (!stems.empty()) out.stems.assign(stems.begin(), stems.begin() + end);
  if (!gt_masks.empty()) out.gt_masks.assign(gt_masks.begin(), gt_masks.begin() + end);
  return out;
}

Tensor ClipWindow::stacked() const {
  if (static_cast<int>(frames.size()) != delta || delta <= 0) {
    throw ShapeError("clip window holds " + std::to_string(frames.size()) +
                     " frames but delta is " + std::to_string(delta));
  }
  std::vector<ag::Var> parts;
  parts.reserve(frames.size());
  for (const auto& f : frames) parts.push_back(ag::constant(f.pixels()));
  ag::NoGradGuard guard;
  return ag::concat_channels(parts).value();
}

std::string frame_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

namespace {

bool is_frame_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

}  // namespace

VideoSequence load_sequence(const fs::path& root, const std::string& sequence_name,
                            const std::string& resolution) {
  const fs::path frame_dir = root / "JPEGImages" / resolution / sequence_name;
  const fs::path mask_dir = root / "Annotations" / resolution / sequence_name;
  if (!fs::is_directory(frame_dir)) {
    throw NotFound("no frame directory " + frame_dir.string());
  }
  std::vector<fs::path> frame_files;
  for (const auto& entry : fs::directory_iterator(frame_dir)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) {
      frame_files.push_back(entry.path());
    }
  }
  std::sort(frame_files.begin(), frame_files.end());
  if (frame_files.empty()) throw EmptySequence("no frames in " + frame_dir.string());

  std::map<std::string, fs::path> mask_files;
  if (fs::is_directory(mask_dir)) {
    for (const auto& entry : fs::directory_iterator(mask_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        mask_files[entry.path().stem().string()] = entry.path();
      }
    }
  }

  VideoSequence seq;
  seq.name = sequence_name;
  bool any_mask = false;
  for (const auto& file : frame_files) {
    const std::string stem = file.stem().string();
    seq.stems.push_back(stem);
    seq.frames.push_back(Frame::from_rgb8(read_image(file, 3)));
    if (auto it = mask_files.find(stem); it != mask_files.end()) {
      seq.gt_masks.emplace_back(read_mask_png(it->second, true));
      any_mask = true;
    } else {
      seq.gt_masks.emplace_back(std::nullopt);
    }
  }
  if (!any_mask) seq.gt_masks.clear();
  seq.validate();
  return seq;
}

void write_mask_png(const fs::path& path, const Mask& mask) {
  write_png(path, mask.to_gray8());
}

Mask read_mask_png(const fs::path& path, bool is_ground_truth) {
  return Mask::from_gray8(read_image(path, 1), is_ground_truth);
}

void write_sequence(const fs::path& root, const std::string& resolution,
                    const VideoSequence& seq, bool lossless_frames) {
  seq.validate();
  const fs::path frame_dir = root / "JPEGImages" / resolution / seq.name;
  const fs::path mask_dir = root / "Annotations" / resolution / seq.name;
  fs::create_directories(frame_dir);
  if (!seq.gt_masks.empty()) fs::create_directories(mask_dir);
  for (int t = 0; t < seq.size(); ++t) {
    const std::string stem = seq.stems.empty() ? frame_stem(t) : seq.stems[t];
    if (lossless_frames) {
      write_png(frame_dir / (stem + ".png"), seq.frames[t].to_rgb8());
    } else {
      write_jpeg(frame_dir / (stem + ".jpg"), seq.frames[t].to_rgb8());
    }
    if (seq.has_gt(t)) write_mask_png(mask_dir / (stem + ".png"), *seq.gt_masks[t]);
  }
}

// ---------------------------------------------------------------------------
// Resampling and windows

Mask resize_mask_nearest(const Mask& mask, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) throw ArgumentError("non-positive resize target");
  if (target_h == mask.height() && target_w == mask.width()) return mask;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(target_h) * target_w);
  for (int y = 0; y < target_h; ++y) {
    const int sy = std::min(mask.height() - 1,
                            static_cast<int>(std::floor((y + 0.5) * mask.height() / target_h)));
    for (int x = 0; x < target_w; ++x) {
      const int sx = std::min(mask.width() - 1,
                              static_cast<int>(std::floor((x + 0.5) * mask.width() / target_w)));
      out[static_cast<std::size_t>(y) * target_w + x] = mask.at(sy, sx);
    }
  }
  return Mask(target_h, target_w, std::move(out), mask.is_ground_truth());
}

std::pair<Frame, std::optional<Mask>> resize_pair(const Frame& frame,
                                                  const std::optional<Mask>& mask,
                                                  int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) throw ArgumentError("non-positive resize target");
  if (target_h < kMinSide || target_w < kMinSide) {
    throw ArgumentError("resize target below 8x8");
  }
  if (mask && (mask->height() != frame.height() || mask->width() != frame.width())) {
    throw ShapeError("resize_pair: mask and frame sizes differ");
  }
  Frame resized = frame;
  if (target_h != frame.height() || target_w != frame.width()) {
    ag::NoGradGuard guard;
    resized = Frame(ag::resize_bilinear(ag::constant(frame.pixels()), target_h, target_w).value());
  }
  std::optional<Mask> m;
  if (mask) m = resize_mask_nearest(*mask, target_h, target_w);
  return {std::move(resized), std::move(m)};
}

ClipWindow make_clip_window(const VideoSequence& seq, int t, int delta) {
  if (delta < 1) throw ArgumentError("delta must be >= 1");
  if (t < 0 || t >= seq.size()) {
    throw ArgumentError("frame index " + std::to_string(t) + " outside sequence of length " +
                        std::to_string(seq.size()));
  }
  ClipWindow w;
  w.delta = delta;
  w.frames.reserve(delta);
  for (int i = t - delta; i < t; ++i) w.frames.push_back(seq.frames[std::max(i, 0)]);
  return w;
}

}  // namespace stcnn
