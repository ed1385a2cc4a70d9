#pragma once

#include <vector>

#include "stcnn/autograd.hpp"
#include "stcnn/data_model.hpp"
#include "stcnn/layers.hpp"
#include "stcnn/model.hpp"

namespace stcnn {

/// Foreground probability map of one prediction head.
struct ScalePrediction {
  int scale_index = 0;  // 0 = coarsest attention stage ... 3 = fused head
  ag::Var logits;       // (N,2,h,w)
  ag::Var probability;  // (N,1,h,w), softmax(logits)[foreground]

  static ScalePrediction from_logits(int scale_index, ag::Var logits);
  int height() const { return probability.shape().h; }
  int width() const { return probability.shape().w; }
};

struct SegmentationOutput {
  /// Three attention stages followed by the fused head, coarse to fine.
  std::vector<ScalePrediction> per_scale;
  /// Context-module prediction that guides the first attention stage.
  ScalePrediction guide;
  /// Thresholded fused prediction at input resolution, one per batch sample.
  std::vector<Mask> final_masks;

  const Mask& final_mask() const { return final_masks.front(); }
};

void init_spatial(ParameterStore& ps, const ArchSpec& arch, Rng& rng);

/// Pyramid pooling: pooled context at grids {1,2,3,6}, each 1x1-projected,
/// upsampled and concatenated after the input. Throws ShapeError when the
/// map is smaller than the largest grid.
ag::Var ppm_forward(ForwardContext& ctx, const ag::Var& features);

struct AttentionOutput {
  ag::Var refined;  // A + A * p, with A = [current + higher ; temporal]
  ag::Var fused;    // refined features compacted back to the stage width
  ScalePrediction prediction;
};

/// One mask-guided refinement stage (stage = 1, 2, 3). All inputs must
/// already share the stage's spatial size; `current` and `higher` must share
/// a channel count. With `gate` false the multiplicative branch is skipped
/// (attention ablation).
AttentionOutput attention_refine(ForwardContext& ctx, int stage, const ag::Var& current,
                                 const ag::Var& higher, const ag::Var& temporal,
                                 const ScalePrediction& coarse, bool gate = true);

/// Zero-valued stand-in for the temporal pyramid of an (N,·,H,W) input.
std::vector<ag::Var> zero_temporal_pyramid(const ArchSpec& arch, int n, int h, int w);

/// Segments a (N,3,H,W) batch guided by a temporal pyramid (strides 4, 8, 16).
/// H and W must be multiples of 16 (8 for the backbone, 16 to align with the
/// temporal branch).
SegmentationOutput segmentation_forward(ForwardContext& ctx, const ag::Var& frames,
                                        const std::vector<ag::Var>& temporal_pyramid);

/// Thresholds a (1,1,h,w) probability map; probabilities >= 0.5 are foreground.
Mask threshold_probability(const Tensor& probability, int sample = 0);

/// Summed pixel-wise cross-entropy of a prediction against `target`
/// ((N,1,h,w) of 0/1), probabilities clamped to [1e-7, 1 - 1e-7].
ag::Var pixelwise_bce(const ScalePrediction& prediction, const Tensor& target);
ag::Var pixelwise_bce(const ScalePrediction& prediction, const Mask& gt);

/// Stacks masks (nearest-resampled to h×w) into an (N,1,h,w) 0/1 tensor.
Tensor mask_targets(const std::vector<Mask>& gts, int h, int w);

enum class LossReduction { Sum, PixelMean };

/// Unweighted sum of pixelwise_bce over the four per-scale predictions and
/// the guide prediction; ground truth is nearest-resampled per scale. With
/// PixelMean each term is divided by its pixel count.
ag::Var multiscale_loss(const SegmentationOutput& output, const std::vector<Mask>& gts,
                        LossReduction reduction = LossReduction::Sum);

}  // namespace stcnn
