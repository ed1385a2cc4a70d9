#include <benchmark/benchmark.h>

#include "stcnn/augmentation.hpp"
#include "stcnn/metrics.hpp"
#include "stcnn/spatial.hpp"
#include "stcnn/synthetic.hpp"
#include "stcnn/temporal.hpp"

using namespace stcnn;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), size = static_cast<int>(state.range(1));
  const ag::Var x = ag::constant(random_tensor({1, c, size, size}, 1));
  const ag::Var w = ag::constant(random_tensor({c, c, 3, 3}, 2));
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ag::conv2d(x, w, {}, {1, 1, 1}));
}
BENCHMARK(BM_Conv3x3)->Args({16, 32})->Args({16, 64})->Args({64, 64});

void BM_ConvBackward(benchmark::State& state) {
  const ag::Var w(random_tensor({16, 16, 3, 3}, 2), true);
  const Tensor x = random_tensor({1, 16, 32, 32}, 1);
  for (auto _ : state) {
    ag::sum_all(ag::conv2d(ag::constant(x), w, {}, {1, 1, 1})).backward();
  }
}
BENCHMARK(BM_ConvBackward);

void BM_Generator(benchmark::State& state) {
  ParameterStore ps = init_parameters({});
  ForwardContext ctx{ps};
  const VideoSequence seq = make_moving_square("b", 6, 64, 64, 1);
  const ClipWindow win = make_clip_window(seq, 5, 4);
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(generator_forward(ctx, win));
}
BENCHMARK(BM_Generator)->Unit(benchmark::kMillisecond);

void BM_Segmentation(benchmark::State& state) {
  ParameterStore ps = init_parameters({});
  ForwardContext ctx{ps};
  const ag::Var frame = ag::constant(random_tensor({1, 3, 64, 64}, 3));
  const auto pyramid = zero_temporal_pyramid(arch_for(ScaleProfile::Tiny), 1, 64, 64);
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(segmentation_forward(ctx, frame, pyramid));
}
BENCHMARK(BM_Segmentation)->Unit(benchmark::kMillisecond);

void BM_SpatialStep(benchmark::State& state) {
  ParameterStore ps = init_parameters({});
  ForwardContext ctx{ps, NormMode::BatchStatistics};
  const ag::Var frame = ag::constant(random_tensor({1, 3, 64, 64}, 3));
  const auto pyramid = zero_temporal_pyramid(arch_for(ScaleProfile::Tiny), 1, 64, 64);
  const VideoSequence seq = make_moving_square("b", 1, 64, 64, 1);
  for (auto _ : state) {
    multiscale_loss(segmentation_forward(ctx, frame, pyramid), {*seq.gt_masks[0]},
                    LossReduction::PixelMean)
        .backward();
    ps.zero_grad();
  }
}
BENCHMARK(BM_SpatialStep)->Unit(benchmark::kMillisecond);

void BM_ContourAccuracy(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const VideoSequence a = make_moving_square("a", 2, n, n, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(contour_accuracy(*a.gt_masks[0], *a.gt_masks[1]));
  }
}
BENCHMARK(BM_ContourAccuracy)->Arg(64)->Arg(480);

void BM_TemporalInstability(benchmark::State& state) {
  const VideoSequence a = make_moving_square("a", 12, 64, 64, 4);
  std::vector<Mask> masks;
  for (const auto& m : a.gt_masks) masks.push_back(*m);
  for (auto _ : state) benchmark::DoNotOptimize(temporal_instability(masks));
}
BENCHMARK(BM_TemporalInstability);

void BM_LucidSynthesis(benchmark::State& state) {
  const VideoSequence a = make_moving_square("a", 1, 64, 64, 4);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        lucid_synthesize(a.frames[0], *a.gt_masks[0], sample_lucid_params(++seed, 64, 64)));
  }
}
BENCHMARK(BM_LucidSynthesis);

}  // namespace

BENCHMARK_MAIN();
