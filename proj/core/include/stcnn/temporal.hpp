#pragma once

#include <span>
#include <vector>

#include "stcnn/autograd.hpp"
#include "stcnn/data_model.hpp"
#include "stcnn/layers.hpp"
#include "stcnn/model.hpp"
#include "stcnn/optim.hpp"

namespace stcnn {

/// Probability clamp that keeps every log term finite.
inline constexpr double kProbEps = 1e-7;

struct GeneratorOutput {
  ag::Var predicted_frame;               // (N,3,H,W)
  std::vector<ag::Var> feature_pyramid;  // strides 4, 8, 16 (finest first)
};

void init_generator(ParameterStore& ps, const ArchSpec& arch, int delta, Rng& rng);
void init_discriminator(ParameterStore& ps, const ArchSpec& arch, Rng& rng);

/// Predicts the next frame from a stacked window (N, 3*delta, H, W).
/// Throws ShapeError unless the channel count is 3*delta and H, W are
/// multiples of the encoder stride (16).
GeneratorOutput generator_forward(ForwardContext& ctx, const ag::Var& stacked_window);
GeneratorOutput generator_forward(ForwardContext& ctx, const ClipWindow& window);

/// Probability that each frame of a (N,3,H,W) batch is real, as (N,1,1,1),
/// clamped to [kProbEps, 1 - kProbEps].
ag::Var discriminator_forward(ForwardContext& ctx, const ag::Var& frames);

/// -log(1 - p_fake) - log(p_real), averaged over the batch.
ag::Var discriminator_loss(const ag::Var& p_fake, const ag::Var& p_real);
double discriminator_loss(double p_fake, double p_real);

/// MSE(predicted, real) - lambda_adv * log(p_fake), adversarial term
/// averaged over the batch.
ag::Var generator_loss(const ag::Var& predicted, const ag::Var& real,
                       const ag::Var& p_fake, double lambda_adv);
double generator_loss(const Tensor& predicted, const Tensor& real, double p_fake,
                      double lambda_adv);

struct PretrainConfig {
  int delta = 4;
  double lambda_adv = 0.001;
  double lr_generator = 1e-7;
  double lr_discriminator = 1e-4;
  int batch_size = 3;
  int steps = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdversarialSample {
  ClipWindow window;
  Frame target;
};

struct AdversarialLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double mse = 0.0;  // reconstruction term of g_loss
};

/// Optimiser state carried across adversarial steps.
struct AdversarialOptimizers {
  AdversarialOptimizers(double lr_generator, double lr_discriminator)
      : generator(Group::Generator, lr_generator),
        discriminator(Group::Discriminator, lr_discriminator) {}
  Adam generator;
  Adam discriminator;
};

/// Stacks the windows and targets of a batch into (N,3δ,H,W) / (N,3,H,W).
std::pair<Tensor, Tensor> stack_adversarial_batch(std::span<const AdversarialSample> batch);

/// One discriminator update with the generator fixed, then one generator
/// update with the discriminator fixed.
AdversarialLosses pretrain_step(std::span<const AdversarialSample> batch,
                                ParameterStore& params, AdversarialOptimizers& optimizers,
                                const PretrainConfig& config,
                                NormMode norm = NormMode::BatchStatistics);

}  // namespace stcnn
