#include "stcnn/temporal.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "stcnn/errors.hpp"

namespace stcnn {

using layers::conv_bn_relu;

namespace {

std::string enc(int stage) { return "gen.enc" + std::to_string(stage + 1); }

}  // namespace

void init_generator(ParameterStore& ps, const ArchSpec& a, int delta, Rng& rng) {
  const Group g = Group::Generator;
  int cin = 3 * delta;
  for (int s = 0; s < 4; ++s) {
    layers::init_conv_bn(ps, g, enc(s) + ".down", cin, a.gen_enc[s], 3, rng);
    for (int u = 0; u < a.gen_units; ++u) {
      layers::init_res_unit(ps, g, enc(s) + ".unit" + std::to_string(u), a.gen_enc[s], rng);
    }
    cin = a.gen_enc[s];
  }
  // Decoder: three 3x3 deconvolutions, each preceded on its output side by a
  // compacted skip feature from the encoder at the same stride.
  layers::init_deconv(ps, g, "gen.dec1.deconv", a.gen_enc[3], a.gen_dec[0], 3, rng);
  layers::init_norm(ps, g, "gen.dec1.bn", a.gen_dec[0]);
  layers::init_conv_bn(ps, g, "gen.skip8", a.gen_enc[2], a.gen_compact, 1, rng);
  layers::init_deconv(ps, g, "gen.dec2.deconv", a.gen_dec[0] + a.gen_compact, a.gen_dec[1], 3, rng);
  layers::init_norm(ps, g, "gen.dec2.bn", a.gen_dec[1]);
  layers::init_conv_bn(ps, g, "gen.skip4", a.gen_enc[1], a.gen_compact, 1, rng);
  layers::init_deconv(ps, g, "gen.dec3.deconv", a.gen_dec[1] + a.gen_compact, a.gen_dec[2], 3, rng);
  layers::init_norm(ps, g, "gen.dec3.bn", a.gen_dec[2]);
  layers::init_conv_bn(ps, g, "gen.skip2", a.gen_enc[0], a.gen_compact, 1, rng);
  layers::init_conv(ps, g, "gen.out", a.gen_dec[2] + a.gen_compact, 3, 3, true, rng);
}

void init_discriminator(ParameterStore& ps, const ArchSpec& a, Rng& rng) {
  const Group g = Group::Discriminator;
  int cin = 3;
  for (int s = 0; s < 4; ++s) {
    layers::init_conv_bn(ps, g, "disc.c" + std::to_string(s + 1), cin, a.disc[s], 3, rng);
    cin = a.disc[s];
  }
  layers::init_conv(ps, g, "disc.fc", cin, 2, 1, true, rng);
}

GeneratorOutput generator_forward(ForwardContext& ctx, const ag::Var& x) {
  const Shape s = x.shape();
  const int expected = 3 * ctx.params.delta;
  if (s.c != expected) {
    throw ShapeError("generator expects " + std::to_string(expected) +
                     " input channels (3*delta), got " + std::to_string(s.c));
  }
  if (s.h % kGeneratorStride != 0 || s.w % kGeneratorStride != 0) {
    throw ShapeError("generator input " + s.str() + " not divisible by stride 16");
  }
  const ArchSpec a = arch_for(ctx.params.profile);
  std::vector<ag::Var> e(4);
  ag::Var h = x;
  for (int st = 0; st < 4; ++st) {
    h = conv_bn_relu(ctx, enc(st) + ".down", h, {2, 1, 1});
    for (int u = 0; u < a.gen_units; ++u) {
      h = layers::res_unit(ctx, enc(st) + ".unit" + std::to_string(u), h, 1);
    }
    e[st] = h;
  }
  auto up = [&](const std::string& name, const ag::Var& in) {
    return ag::relu(layers::norm(ctx, name + ".bn",
                                 layers::deconv(ctx, name + ".deconv", in, 2, 1, 1)));
  };
  ag::Var p8 = ag::concat_channels(
      {up("gen.dec1", e[3]), conv_bn_relu(ctx, "gen.skip8", e[2], {})});
  ag::Var p4 = ag::concat_channels(
      {up("gen.dec2", p8), conv_bn_relu(ctx, "gen.skip4", e[1], {})});
  ag::Var p2 = ag::concat_channels(
      {up("gen.dec3", p4), conv_bn_relu(ctx, "gen.skip2", e[0], {})});
  ag::Var full = ag::resize_bilinear(p2, s.h, s.w);
  GeneratorOutput out;
  out.predicted_frame = layers::conv(ctx, "gen.out", full, {1, 1, 1});
  out.feature_pyramid = {p4, p8, e[3]};
  return out;
}

GeneratorOutput generator_forward(ForwardContext& ctx, const ClipWindow& window) {
  if (window.delta != ctx.params.delta) {
    throw ShapeError("window delta " + std::to_string(window.delta) +
                     " does not match model delta " + std::to_string(ctx.params.delta));
  }
  return generator_forward(ctx, ag::constant(window.stacked()));
}

ag::Var discriminator_forward(ForwardContext& ctx, const ag::Var& frames) {
  if (frames.shape().c != 3) {
    throw ShapeError("discriminator expects 3-channel frames, got " + frames.shape().str());
  }
  ag::Var h = frames;
  for (int s = 0; s < 4; ++s) {
    h = conv_bn_relu(ctx, "disc.c" + std::to_string(s + 1), h, {2, 1, 1});
  }
  ag::Var logits = layers::conv(ctx, "disc.fc", ag::adaptive_avg_pool(h, 1), {});
  // Class 1 of the 2-class head is "real".
  return ag::clamp(ag::fg_probability(logits), kProbEps, 1.0 - kProbEps);
}

namespace {

void check_probabilities(const ag::Var& p, const char* what) {
  for (double v : p.value().values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ArgumentError(std::string(what) + " outside [0,1]");
    }
  }
}

}  // namespace

ag::Var discriminator_loss(const ag::Var& p_fake, const ag::Var& p_real) {
  check_probabilities(p_fake, "p_fake");
  check_probabilities(p_real, "p_real");
  const ag::Var pf = ag::clamp(p_fake, kProbEps, 1.0 - kProbEps);
  const ag::Var pr = ag::clamp(p_real, kProbEps, 1.0 - kProbEps);
  return ag::add(ag::batch_mean(ag::neg_log(ag::affine(pf, -1.0, 1.0))),
                 ag::batch_mean(ag::neg_log(pr)));
}

double discriminator_loss(double p_fake, double p_real) {
  ag::NoGradGuard guard;
  return discriminator_loss(ag::constant(Tensor::scalar(p_fake)),
                            ag::constant(Tensor::scalar(p_real)))
      .value()[0];
}

ag::Var generator_loss(const ag::Var& predicted, const ag::Var& real,
                       const ag::Var& p_fake, double lambda_adv) {
  check_probabilities(p_fake, "p_fake");
  const ag::Var reconstruction = ag::mse(predicted, real);
  if (lambda_adv == 0.0) return reconstruction;
  const ag::Var pf = ag::clamp(p_fake, kProbEps, 1.0 - kProbEps);
  return ag::add(reconstruction, ag::scale(ag::batch_mean(ag::neg_log(pf)), lambda_adv));
}

double generator_loss(const Tensor& predicted, const Tensor& real, double p_fake,
                      double lambda_adv) {
  ag::NoGradGuard guard;
  return generator_loss(ag::constant(predicted), ag::constant(real),
                        ag::constant(Tensor::scalar(p_fake)), lambda_adv)
      .value()[0];
}

void PretrainConfig::validate() const {
  if (delta < 1) throw ArgumentError("delta must be >= 1");
  if (lambda_adv < 0.0) throw ArgumentError("lambda_adv must be >= 0");
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) {
    throw ArgumentError("learning rates must be > 0");
  }
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (steps < 0) throw ArgumentError("steps must be >= 0");
}

std::pair<Tensor, Tensor> stack_adversarial_batch(std::span<const AdversarialSample> batch) {
  std::vector<Tensor> windows, targets;
  windows.reserve(batch.size());
  targets.reserve(batch.size());
  for (const auto& s : batch) {
    windows.push_back(s.window.stacked());
    targets.push_back(s.target.pixels());
  }
  return {stack_batch(windows), stack_batch(targets)};
}

AdversarialLosses pretrain_step(std::span<const AdversarialSample> batch,
                                ParameterStore& params, AdversarialOptimizers& opt,
                                const PretrainConfig& config, NormMode norm) {
  if (batch.empty()) throw ArgumentError("pretrain_step: empty batch");
  config.validate();
  if (params.frozen(Group::Generator) && params.frozen(Group::Discriminator)) {
    throw ArgumentError("pretrain_step: both adversarial groups are frozen");
  }
  for (const auto& s : batch) {
    if (s.window.delta != params.delta) throw ShapeError("window delta mismatch");
  }
  const auto [windows, targets] = stack_adversarial_batch(batch);
  const ag::Var real = ag::constant(targets);
  ForwardContext ctx{params, norm};
  AdversarialLosses losses;

  params.zero_grad();
  GeneratorOutput g = generator_forward(ctx, ag::constant(windows));

  // Discriminator half-step; the generated frame is a constant here.
  {
    const bool train_d = !params.frozen(Group::Discriminator);
    std::optional<ag::NoGradGuard> guard;
    if (!train_d) guard.emplace();
    const ag::Var p_fake = discriminator_forward(ctx, g.predicted_frame.detach());
    const ag::Var p_real = discriminator_forward(ctx, real);
    const ag::Var d_loss = discriminator_loss(p_fake, p_real);
    losses.d_loss = d_loss.value()[0];
    if (train_d) {
      d_loss.backward();
      opt.discriminator.step(params);
    }
  }
  params.zero_grad();

  // Generator half-step against the updated, now fixed, discriminator.
  {
    const bool train_g = !params.frozen(Group::Generator);
    std::optional<ag::NoGradGuard> guard;
    if (!train_g) guard.emplace();
    ForwardContext fixed{params, norm, /*track_running=*/false};
    const ag::Var p_fake = discriminator_forward(fixed, g.predicted_frame);
    const ag::Var g_loss =
        generator_loss(g.predicted_frame, real, p_fake, config.lambda_adv);
    losses.g_loss = g_loss.value()[0];
    losses.mse = ag::mse(g.predicted_frame.detach(), real).value()[0];
    if (train_g) {
      g_loss.backward();
      opt.generator.step(params);
    }
  }
  params.zero_grad();
  return losses;
}

}  // namespace stcnn
