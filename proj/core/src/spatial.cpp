#include "stcnn/spatial.hpp"

#include <string>

#include "stcnn/errors.hpp"
#include "stcnn/temporal.hpp"

namespace stcnn {

using layers::conv_bn_relu;

namespace {

const Group kG = Group::Spatial;

std::string bin_name(int bin) { return "sp.ppm.bin" + std::to_string(bin); }
std::string att_name(int stage) { return "sp.att" + std::to_string(stage); }

void init_stage(ParameterStore& ps, const std::string& name, int cin, int cout, int units,
                Rng& rng) {
  layers::init_conv_bn(ps, kG, name + ".down", cin, cout, 3, rng);
  for (int u = 0; u < units; ++u) {
    layers::init_res_unit(ps, kG, name + ".unit" + std::to_string(u), cout, rng);
  }
}

ag::Var stage(ForwardContext& ctx, const std::string& name, const ag::Var& x, int units,
              int stride, int dilation) {
  ag::Var h = conv_bn_relu(ctx, name + ".down", x, {stride, dilation, dilation});
  for (int u = 0; u < units; ++u) {
    h = layers::res_unit(ctx, name + ".unit" + std::to_string(u), h, dilation);
  }
  return h;
}

ScalePrediction resized(const ScalePrediction& p, int h, int w) {
  ScalePrediction out;
  out.scale_index = p.scale_index;
  out.logits = ag::resize_bilinear(p.logits, h, w);
  out.probability = ag::resize_bilinear(p.probability, h, w);
  return out;
}

}  // namespace

ScalePrediction ScalePrediction::from_logits(int scale_index, ag::Var logits) {
  ScalePrediction p;
  p.scale_index = scale_index;
  p.probability = ag::fg_probability(logits);
  p.logits = std::move(logits);
  return p;
}

void init_spatial(ParameterStore& ps, const ArchSpec& a, Rng& rng) {
  layers::init_conv_bn(ps, kG, "sp.stem", 3, a.sp_stem, 3, rng);
  init_stage(ps, "sp.s1", a.sp_stem, a.sp_stage[0], a.sp_units, rng);
  init_stage(ps, "sp.s2", a.sp_stage[0], a.sp_stage[1], a.sp_units, rng);
  init_stage(ps, "sp.s3", a.sp_stage[1], a.sp_deep, a.sp_units, rng);
  init_stage(ps, "sp.s4", a.sp_deep, a.sp_deep, a.sp_units, rng);

  // Pooled branches carry a bias instead of a norm: the 1x1 grid has a
  // single value per channel and batch moments would erase it.
  for (int bin : kPpmBins) {
    layers::init_conv(ps, kG, bin_name(bin), a.sp_deep, a.ppm_reduce, 1, true, rng);
  }
  const int ppm_in = a.sp_deep + 4 * a.ppm_reduce;
  layers::init_conv_bn(ps, kG, "sp.ppm.bottleneck", ppm_in, a.att_width, 3, rng);
  layers::init_conv(ps, kG, "sp.ppm.guide", a.att_width, 2, 1, true, rng);

  layers::init_conv_bn(ps, kG, "sp.lateral1", a.sp_deep, a.att_width, 1, rng);
  layers::init_conv_bn(ps, kG, "sp.lateral2", a.sp_stage[0], a.att_width, 1, rng);
  layers::init_conv_bn(ps, kG, "sp.lateral3", a.sp_stem, a.att_width, 1, rng);

  const auto pyr = a.pyramid_channels();
  for (int stage = 1; stage <= 3; ++stage) {
    const int temporal_c = pyr[3 - stage];
    layers::init_conv_bn(ps, kG, att_name(stage) + ".fuse", a.att_width + temporal_c,
                         a.att_width, 3, rng);
    layers::init_conv(ps, kG, att_name(stage) + ".head", a.att_width, 2, 1, true, rng);
  }
  layers::init_conv(ps, kG, "sp.final", 4 * a.att_width, 2, 3, true, rng);
}

ag::Var ppm_forward(ForwardContext& ctx, const ag::Var& features) {
  const Shape s = features.shape();
  const int largest = kPpmBins[3];
  if (s.h < largest || s.w < largest) {
    throw ShapeError("pyramid pooling needs at least " + std::to_string(largest) + "x" +
                     std::to_string(largest) + ", got " + s.str());
  }
  std::vector<ag::Var> parts{features};
  for (int bin : kPpmBins) {
    ag::Var pooled = ag::adaptive_avg_pool(features, bin);
    pooled = ag::relu(layers::conv(ctx, bin_name(bin), pooled, {}));
    parts.push_back(ag::resize_bilinear(pooled, s.h, s.w));
  }
  return ag::concat_channels(parts);
}

AttentionOutput attention_refine(ForwardContext& ctx, int stage, const ag::Var& current,
                                 const ag::Var& higher, const ag::Var& temporal,
                                 const ScalePrediction& coarse, bool gate) {
  if (stage < 1 || stage > 3) throw ArgumentError("attention stage must be 1..3");
  const Shape c = current.shape(), h = higher.shape(), t = temporal.shape();
  const Shape p = coarse.probability.shape();
  const auto same_grid = [&](const Shape& o) {
    return o.n == c.n && o.h == c.h && o.w == c.w;
  };
  if (!same_grid(h) || !same_grid(t) || !same_grid(p) || p.c != 1) {
    throw ShapeError("attention stage " + std::to_string(stage) + ": current " + c.str() +
                     ", higher " + h.str() + ", temporal " + t.str() + ", mask " + p.str());
  }
  if (h.c != c.c) {
    throw ShapeError("attention stage " + std::to_string(stage) + ": current has " +
                     std::to_string(c.c) + " channels, higher has " + std::to_string(h.c));
  }
  AttentionOutput out;
  const ag::Var a = ag::concat_channels({ag::add(current, higher), temporal});
  out.refined = gate ? ag::add(a, ag::mul_channel_broadcast(a, coarse.probability)) : a;
  out.fused = conv_bn_relu(ctx, att_name(stage) + ".fuse", out.refined, {1, 1, 1});
  out.prediction = ScalePrediction::from_logits(
      stage - 1, layers::conv(ctx, att_name(stage) + ".head", out.fused, {}));
  return out;
}

std::vector<ag::Var> zero_temporal_pyramid(const ArchSpec& arch, int n, int h, int w) {
  const auto ch = arch.pyramid_channels();
  const int strides[3] = {4, 8, 16};
  std::vector<ag::Var> out;
  for (int i = 0; i < 3; ++i) {
    out.push_back(ag::constant(Tensor({n, ch[i], h / strides[i], w / strides[i]}, 0.0)));
  }
  return out;
}

SegmentationOutput segmentation_forward(ForwardContext& ctx, const ag::Var& frames,
                                        const std::vector<ag::Var>& pyramid) {
  const Shape s = frames.shape();
  if (s.c != 3) throw ShapeError("segmentation expects 3-channel frames, got " + s.str());
  if (s.h % kGeneratorStride != 0 || s.w % kGeneratorStride != 0) {
    throw ShapeError("segmentation input " + s.str() + " not divisible by stride 16");
  }
  const ArchSpec a = arch_for(ctx.params.profile);
  const auto pyr_c = a.pyramid_channels();
  const int strides[3] = {4, 8, 16};
  if (pyramid.size() != 3) throw ArgumentError("temporal pyramid needs 3 levels");
  for (int i = 0; i < 3; ++i) {
    const Shape ps = pyramid[i].shape();
    if (ps.n != s.n || ps.c != pyr_c[i] || ps.h != s.h / strides[i] ||
        ps.w != s.w / strides[i]) {
      throw ShapeError("temporal level " + std::to_string(i) + " is " + ps.str());
    }
  }
  const bool gate = ctx.params.attention;
  const int h2 = s.h / 2, w2 = s.w / 2, h4 = s.h / 4, w4 = s.w / 4;
  const int h8 = s.h / 8, w8 = s.w / 8;

  const ag::Var stem = conv_bn_relu(ctx, "sp.stem", frames, {2, 1, 1});
  const ag::Var s1 = stage(ctx, "sp.s1", stem, a.sp_units, 2, 1);
  const ag::Var s2 = stage(ctx, "sp.s2", s1, a.sp_units, 2, 1);
  const ag::Var s3 = stage(ctx, "sp.s3", s2, a.sp_units, 1, 2);
  const ag::Var s4 = stage(ctx, "sp.s4", s3, a.sp_units, 1, 4);

  const ag::Var context =
      conv_bn_relu(ctx, "sp.ppm.bottleneck", ppm_forward(ctx, s4), {1, 1, 1});
  SegmentationOutput out;
  out.guide = ScalePrediction::from_logits(-1, layers::conv(ctx, "sp.ppm.guide", context, {}));

  AttentionOutput st1 = attention_refine(
      ctx, 1, conv_bn_relu(ctx, "sp.lateral1", s4, {}), context,
      ag::resize_bilinear(pyramid[2], h8, w8), out.guide, gate);
  AttentionOutput st2 = attention_refine(
      ctx, 2, conv_bn_relu(ctx, "sp.lateral2", s1, {}),
      ag::resize_bilinear(st1.fused, h4, w4), ag::resize_bilinear(pyramid[1], h4, w4),
      resized(st1.prediction, h4, w4), gate);
  AttentionOutput st3 = attention_refine(
      ctx, 3, conv_bn_relu(ctx, "sp.lateral3", stem, {}),
      ag::resize_bilinear(st2.fused, h2, w2), ag::resize_bilinear(pyramid[0], h2, w2),
      resized(st2.prediction, h2, w2), gate);

  // The fused head runs at input resolution so edges land on single pixels.
  const ag::Var merged = ag::concat_channels(
      {ag::resize_bilinear(context, s.h, s.w), ag::resize_bilinear(st1.fused, s.h, s.w),
       ag::resize_bilinear(st2.fused, s.h, s.w), ag::resize_bilinear(st3.fused, s.h, s.w)});
  out.per_scale = {st1.prediction, st2.prediction, st3.prediction,
                   ScalePrediction::from_logits(3, layers::conv(ctx, "sp.final", merged,
                                                                {1, 1, 1}))};

  const Tensor& full = out.per_scale[3].probability.value();
  for (int n = 0; n < s.n; ++n) out.final_masks.push_back(threshold_probability(full, n));
  return out;
}

Mask threshold_probability(const Tensor& probability, int sample) {
  const Shape s = probability.shape();
  if (s.c != 1) throw ShapeError("threshold expects one channel, got " + s.str());
  std::vector<std::uint8_t> labels(s.plane());
  const double* p = probability.plane(sample, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = p[i] >= 0.5 ? 1 : 0;
  return Mask(s.h, s.w, std::move(labels));
}

ag::Var pixelwise_bce(const ScalePrediction& prediction, const Tensor& target) {
  return ag::bce_sum(prediction.probability, target, kProbEps);
}

ag::Var pixelwise_bce(const ScalePrediction& prediction, const Mask& gt) {
  return pixelwise_bce(prediction, mask_targets({gt}, prediction.height(), prediction.width()));
}

Tensor mask_targets(const std::vector<Mask>& gts, int h, int w) {
  std::vector<Tensor> parts;
  parts.reserve(gts.size());
  for (const Mask& m : gts) {
    parts.push_back((m.height() == h && m.width() == w ? m : resize_mask_nearest(m, h, w))
                        .to_tensor());
  }
  return stack_batch(parts);
}

ag::Var multiscale_loss(const SegmentationOutput& output, const std::vector<Mask>& gts,
                        LossReduction reduction) {
  if (gts.empty()) throw ArgumentError("multiscale_loss: no ground truth");
  if (static_cast<int>(gts.size()) != output.guide.probability.shape().n) {
    throw ShapeError("multiscale_loss: batch of " +
                     std::to_string(output.guide.probability.shape().n) + " predictions, " +
                     std::to_string(gts.size()) + " masks");
  }
  std::vector<const ScalePrediction*> terms{&output.guide};
  for (const auto& p : output.per_scale) terms.push_back(&p);
  ag::Var total;
  for (const ScalePrediction* p : terms) {
    ag::Var term = pixelwise_bce(*p, mask_targets(gts, p->height(), p->width()));
    if (reduction == LossReduction::PixelMean) {
      term = ag::scale(term, 1.0 / static_cast<double>(p->probability.shape().numel()));
    }
    total = total.defined() ? ag::add(total, term) : term;
  }
  return total;
}

}  // namespace stcnn
