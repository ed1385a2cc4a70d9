#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stcnn/image_io.hpp"
#include "stcnn/tensor.hpp"

namespace stcnn {

inline constexpr int kMinSide = 8;

/// 8-bit intensity to network range: (v/255 - 0.5) / 0.5, i.e. [-1, 1].
inline double normalize_pixel(std::uint8_t v) { return (v / 255.0 - 0.5) / 0.5; }
std::uint8_t denormalize_pixel(double v);

/// RGB frame held as a (1,3,H,W) tensor in the normalised range.
class Frame {
 public:
  Frame() = default;
  /// Throws ShapeError for layouts other than (1,3,H,W) with H,W >= 8 and
  /// ArgumentError for non-finite values.
  explicit Frame(Tensor pixels);

  static Frame from_rgb8(const RawImage& image);
  RawImage to_rgb8() const;

  int height() const { return pixels_.h(); }
  int width() const { return pixels_.w(); }
  const Tensor& pixels() const { return pixels_; }
  double at(int c, int y, int x) const { return pixels_.at(0, c, y, x); }

  bool operator==(const Frame& other) const {
    return pixels_.shape() == other.pixels_.shape() &&
           pixels_.storage() == other.pixels_.storage();
  }

 private:
  Tensor pixels_;
};

/// Binary label map; every entry is exactly 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, std::vector<std::uint8_t> labels,
       bool is_ground_truth = false);
  static Mask zeros(int height, int width) {
    return Mask(height, width,
                std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0));
  }
  /// Any nonzero gray value becomes foreground.
  static Mask from_gray8(const RawImage& image, bool is_ground_truth);
  RawImage to_gray8() const;  // 0 / 255

  int height() const { return height_; }
  int width() const { return width_; }
  bool is_ground_truth() const { return is_ground_truth_; }
  Mask with_ground_truth(bool gt) const {
    Mask m = *this;
    m.is_ground_truth_ = gt;
    return m;
  }

  std::uint8_t at(int y, int x) const {
    return labels_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  std::size_t foreground_count() const;

  /// (1,1,H,W) tensor of 0.0 / 1.0.
  Tensor to_tensor() const;

  /// Labels and size only; the ground-truth flag is metadata.
  bool operator==(const Mask& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           labels_ == other.labels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
  bool is_ground_truth_ = false;
};

struct VideoSequence {
  std::string name;
  std::vector<std::string> stems;          // file stems, one per frame
  std::vector<Frame> frames;               // 0-indexed
  std::vector<std::optional<Mask>> gt_masks;  // empty, or aligned with frames

  int size() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.front().height(); }
  int width() const { return frames.front().width(); }
  bool has_gt(int t) const {
    return t >= 0 && t < static_cast<int>(gt_masks.size()) && gt_masks[t].has_value();
  }

  /// Validates the sequence invariants (non-empty, uniform size, aligned masks).
  void validate() const;

  /// Frames 0..last (inclusive) with their masks.
  VideoSequence truncated(int last) const;
};

/// The `delta` frames preceding a target frame, oldest first.
struct ClipWindow {
  int delta = 0;
  std::vector<Frame> frames;

  int stacked_channels() const { return 3 * delta; }
  /// Channel-wise stack, (1, 3*delta, H, W); frame i occupies channels 3i..3i+2.
  Tensor stacked() const;
};

/// Reads `<root>/JPEGImages/<res>/<seq>` and `<root>/Annotations/<res>/<seq>`.
/// Frames are the .jpg/.jpeg/.png files in lexicographic order; masks pair
/// with frames by stem.
VideoSequence load_sequence(const std::filesystem::path& root,
                            const std::string& sequence_name,
                            const std::string& resolution = "480p");

/// Writes frames (JPEG, or PNG when `lossless_frames`) and every present mask
/// (8-bit PNG, 0/255) to the same layout.
void write_sequence(const std::filesystem::path& root, const std::string& resolution,
                    const VideoSequence& seq, bool lossless_frames = false);

void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path, bool is_ground_truth = true);

/// Bilinear resize of the frame; nearest-label resize of the mask.
std::pair<Frame, std::optional<Mask>> resize_pair(const Frame& frame,
                                                  const std::optional<Mask>& mask,
                                                  int target_h, int target_w);

/// Nearest-label resampling: source index floor((i + 0.5) * in / out).
Mask resize_mask_nearest(const Mask& mask, int target_h, int target_w);

/// Window of the `delta` frames before `t`; for t < delta the head is padded
/// with (delta - t) copies of frame 0, so t = 0 yields delta copies of frame 0.
ClipWindow make_clip_window(const VideoSequence& seq, int t, int delta);

/// "00000"-style zero padded stem.
std::string frame_stem(int index);

}  // namespace stcnn
