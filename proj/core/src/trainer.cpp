#include "stcnn/trainer.hpp"

#include <cstdio>

#include "stcnn/augmentation.hpp"
#include "stcnn/errors.hpp"
#include "stcnn/optim.hpp"
#include "stcnn/rng.hpp"

namespace stcnn {

namespace {

// Stream offsets keep the phases' random draws independent of each other.
constexpr std::uint64_t kTemporalStream = 0x7E3A1;
constexpr std::uint64_t kSpatialStream = 0x5A7B2;
constexpr std::uint64_t kOfflineStream = 0x0FF13;
constexpr std::uint64_t kOnlineStream = 0x041E4;

class FreezeScope {
 public:
  FreezeScope(ParameterStore& ps, bool gen, bool disc, bool spatial) : ps_(ps) {
    for (int g = 0; g < 3; ++g) saved_[g] = ps.frozen(static_cast<Group>(g));
    set(gen, disc, spatial);
  }
  ~FreezeScope() { set(saved_[0], saved_[1], saved_[2]); }
  void set(bool gen, bool disc, bool spatial) {
    ps_.set_frozen(Group::Generator, gen);
    ps_.set_frozen(Group::Discriminator, disc);
    ps_.set_frozen(Group::Spatial, spatial);
  }
  FreezeScope(const FreezeScope&) = delete;
  FreezeScope& operator=(const FreezeScope&) = delete;

 private:
  ParameterStore& ps_;
  bool saved_[3];
};

Frame flip_frame(const Frame& f) {
  Tensor out = f.pixels();
  const int h = f.height(), w = f.width();
  for (int c = 0; c < 3; ++c) {
    const double* src = f.pixels().plane(0, c);
    double* dst = out.plane(0, c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) dst[y * w + x] = src[y * w + (w - 1 - x)];
    }
  }
  return Frame(std::move(out));
}

AdversarialSample flipped(const AdversarialSample& s) {
  AdversarialSample out;
  out.window.delta = s.window.delta;
  for (const Frame& f : s.window.frames) out.window.frames.push_back(flip_frame(f));
  out.target = flip_frame(s.target);
  return out;
}

PretrainConfig adversarial_config(const TrainSchedule& s, double lr_g, double lr_d, int batch) {
  PretrainConfig c;
  c.delta = s.delta;
  c.lambda_adv = s.lambda_adv;
  c.lr_generator = lr_g;
  c.lr_discriminator = lr_d;
  c.batch_size = batch;
  c.seed = s.seed;
  return c;
}

double spatial_step(ParameterStore& ps, Sgd& opt, NormMode norm, const Tensor& frames,
                    const std::vector<ag::Var>& pyramid, const std::vector<Mask>& gts,
                    LossReduction reduction) {
  ps.zero_grad();
  ForwardContext ctx{ps, norm};
  const SegmentationOutput out = segmentation_forward(ctx, ag::constant(frames), pyramid);
  const ag::Var loss = multiscale_loss(out, gts, reduction);
  loss.backward();
  opt.step(ps);
  ps.zero_grad();
  return loss.value()[0];
}

void check_delta(const ParameterStore& ps, const TrainSchedule& s) {
  if (ps.delta != s.delta) {
    throw ConfigError("schedule delta " + std::to_string(s.delta) +
                      " differs from model delta " + std::to_string(ps.delta));
  }
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::PretrainTemporal: return "pretrain_temporal";
    case Phase::PretrainSpatial: return "pretrain_spatial";
    case Phase::OfflineIterative: return "offline_iterative";
    case Phase::Online: return "online";
  }
  return "unknown";
}

TrainSchedule TrainSchedule::desk() {
  TrainSchedule s;
  s.pretrain_lr_generator = 2e-3;
  s.pretrain_lr_discriminator = 1e-4;
  s.spatial_lr = 0.02;
  s.offline_lr_generator = 2e-4;
  s.offline_lr_discriminator = 1e-4;
  s.offline_lr_spatial = 2e-3;
  s.online_lr = 2e-3;
  return s;
}

void TrainSchedule::validate() const {
  if (delta < 1) throw ArgumentError("delta must be >= 1");
  if (lambda_adv < 0) throw ArgumentError("lambda_adv must be >= 0");
  for (double lr : {pretrain_lr_generator, pretrain_lr_discriminator, spatial_lr,
                    offline_lr_generator, offline_lr_discriminator, offline_lr_spatial,
                    online_lr}) {
    if (!(lr > 0.0)) throw ArgumentError("learning rates must be > 0");
  }
  for (int b : {pretrain_batch, spatial_batch, offline_batch, online_batch}) {
    if (b < 1) throw ArgumentError("batch sizes must be >= 1");
  }
  if (pretrain_temporal_steps < 0 || pretrain_spatial_steps < 0 || offline_steps < 0 ||
      online_iterations < 0) {
    throw ArgumentError("step counts must be >= 0");
  }
  if (alternation < 1) throw ArgumentError("alternation must be >= 1");
  if (online_set_size < 1) throw ArgumentError("online_set_size must be >= 1");
  if (momentum < 0 || momentum >= 1) throw ArgumentError("momentum must be in [0, 1)");
  if (weight_decay < 0) throw ArgumentError("weight_decay must be >= 0");
}

LossLog::LossLog(const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  file_.open(path, std::ios::app);
  if (!file_) throw NotFound("cannot open loss log " + path.string());
  if (fresh) file_ << "step,phase,loss_name,value\n";
}

void LossLog::record(int step, Phase phase, const std::string& name, double value) {
  rows_.push_back({step, phase_name(phase), name, value});
  if (file_.is_open()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    file_ << step << ',' << phase_name(phase) << ',' << name << ',' << buf << '\n';
    file_.flush();
  }
}

std::vector<double> LossLog::series(Phase phase, const std::string& name) const {
  std::vector<double> out;
  for (const Row& r : rows_) {
    if (r.phase == phase_name(phase) && r.name == name) out.push_back(r.value);
  }
  return out;
}

ImageSet annotated_frames(const std::vector<VideoSequence>& sequences) {
  ImageSet out;
  for (const auto& seq : sequences) {
    for (int t = 0; t < seq.size(); ++t) {
      if (seq.has_gt(t)) out.emplace_back(seq.frames[t], *seq.gt_masks[t]);
    }
  }
  return out;
}

std::vector<ag::Var> temporal_features(ForwardContext& ctx, const Tensor& windows, int height,
                                       int width) {
  if (!ctx.params.temporal) {
    return zero_temporal_pyramid(arch_for(ctx.params.profile), windows.n(), height, width);
  }
  return generator_forward(ctx, ag::constant(windows)).feature_pyramid;
}

void pretrain_temporal(const std::vector<VideoSequence>& dataset, ParameterStore& params,
                       const TrainSchedule& schedule, LossLog* log) {
  schedule.validate();
  check_delta(params, schedule);
  const int delta = schedule.delta;
  std::vector<std::pair<int, int>> targets;  // (sequence, t)
  for (int s = 0; s < static_cast<int>(dataset.size()); ++s) {
    for (int t = delta; t < dataset[s].size(); ++t) targets.emplace_back(s, t);
  }
  if (targets.empty()) {
    throw DataError("temporal pretraining needs a sequence with at least " +
                    std::to_string(delta + 1) + " frames");
  }
  FreezeScope freeze(params, false, false, true);
  const PretrainConfig config =
      adversarial_config(schedule, schedule.pretrain_lr_generator,
                         schedule.pretrain_lr_discriminator, schedule.pretrain_batch);
  AdversarialOptimizers opt(config.lr_generator, config.lr_discriminator);
  Rng rng(schedule.seed ^ kTemporalStream);
  for (int step = 0; step < schedule.pretrain_temporal_steps; ++step) {
    std::vector<AdversarialSample> batch;
    for (int b = 0; b < schedule.pretrain_batch; ++b) {
      const auto [s, t] = targets[rng.uniform_int(0, static_cast<int>(targets.size()) - 1)];
      AdversarialSample sample{make_clip_window(dataset[s], t, delta), dataset[s].frames[t]};
      if (schedule.flip_clips && rng.bernoulli(0.5)) sample = flipped(sample);
      batch.push_back(std::move(sample));
    }
    const AdversarialLosses l =
        pretrain_step(batch, params, opt, config, NormMode::BatchStatistics);
    if (log) {
      log->record(step, Phase::PretrainTemporal, "d_loss", l.d_loss);
      log->record(step, Phase::PretrainTemporal, "g_loss", l.g_loss);
      log->record(step, Phase::PretrainTemporal, "mse", l.mse);
    }
  }
}

void pretrain_spatial(const ImageSet& dataset, ParameterStore& params,
                      const TrainSchedule& schedule, LossLog* log) {
  schedule.validate();
  if (dataset.empty()) throw DataError("spatial pretraining needs at least one image");
  FreezeScope freeze(params, true, true, false);
  Sgd opt(Group::Spatial, schedule.spatial_lr, schedule.momentum, schedule.weight_decay);
  Rng rng(schedule.seed ^ kSpatialStream);
  const ArchSpec arch = arch_for(params.profile);
  for (int step = 0; step < schedule.pretrain_spatial_steps; ++step) {
    std::vector<Tensor> frames;
    std::vector<Mask> gts;
    for (int b = 0; b < schedule.spatial_batch; ++b) {
      const auto& [frame, mask] =
          dataset[rng.uniform_int(0, static_cast<int>(dataset.size()) - 1)];
      if (schedule.augment_images) {
        auto [f, m] = basic_augment(frame, mask, rng);
        frames.push_back(f.pixels());
        gts.push_back(std::move(m));
      } else {
        frames.push_back(frame.pixels());
        gts.push_back(mask);
      }
    }
    const Tensor batch = stack_batch(frames);
    const double loss =
        spatial_step(params, opt, NormMode::BatchStatistics, batch,
                     zero_temporal_pyramid(arch, batch.n(), batch.h(), batch.w()), gts,
                     schedule.reduction);
    if (log) log->record(step, Phase::PretrainSpatial, "multiscale", loss);
  }
}

void offline_iterative_train(const std::vector<VideoSequence>& dataset,
                             ParameterStore& params, const TrainSchedule& schedule,
                             LossLog* log, const OfflineObserver& observer) {
  schedule.validate();
  check_delta(params, schedule);
  std::vector<std::pair<int, int>> targets;
  for (int s = 0; s < static_cast<int>(dataset.size()); ++s) {
    const VideoSequence& seq = dataset[s];
    for (int t = 1; t < seq.size(); ++t) {
      if (!seq.has_gt(t)) {
        throw DataError("offline training: sequence " + seq.name + " lacks a mask for frame " +
                        std::to_string(t));
      }
      targets.emplace_back(s, t);
    }
  }
  if (targets.empty()) throw DataError("offline training needs sequences of >= 2 frames");

  FreezeScope freeze(params, false, false, true);
  const PretrainConfig config =
      adversarial_config(schedule, schedule.offline_lr_generator,
                         schedule.offline_lr_discriminator, schedule.offline_batch);
  AdversarialOptimizers adv(config.lr_generator, config.lr_discriminator);
  Sgd sgd(Group::Spatial, schedule.offline_lr_spatial, schedule.momentum,
          schedule.weight_decay);
  Rng rng(schedule.seed ^ kOfflineStream);
  auto draw = [&] { return targets[rng.uniform_int(0, static_cast<int>(targets.size()) - 1)]; };

  for (int step = 0; step < schedule.offline_steps; ++step) {
    const bool temporal_phase = (step / schedule.alternation) % 2 == 0;
    if (temporal_phase) {
      freeze.set(false, false, true);
      // Without a temporal branch there is nothing to adapt; the step is
      // still drawn so both variants consume the same random stream.
      std::vector<AdversarialSample> batch;
      for (int b = 0; b < schedule.offline_batch; ++b) {
        const auto [s, t] = draw();
        batch.push_back({make_clip_window(dataset[s], t, schedule.delta), dataset[s].frames[t]});
      }
      if (params.temporal) {
        const AdversarialLosses l =
            pretrain_step(batch, params, adv, config, NormMode::RunningStatistics);
        if (log) {
          log->record(step, Phase::OfflineIterative, "d_loss", l.d_loss);
          log->record(step, Phase::OfflineIterative, "g_loss", l.g_loss);
        }
      }
    } else {
      freeze.set(true, true, false);
      std::vector<Tensor> windows, frames;
      std::vector<Mask> gts;
      for (int b = 0; b < schedule.offline_batch; ++b) {
        const auto [s, t] = draw();
        windows.push_back(make_clip_window(dataset[s], t, schedule.delta).stacked());
        frames.push_back(dataset[s].frames[t].pixels());
        gts.push_back(*dataset[s].gt_masks[t]);
      }
      const Tensor batch = stack_batch(frames);
      ForwardContext gctx{params, NormMode::RunningStatistics};
      const auto pyramid = temporal_features(gctx, stack_batch(windows), batch.h(), batch.w());
      const double loss = spatial_step(params, sgd, NormMode::RunningStatistics, batch,
                                       pyramid, gts, schedule.reduction);
      if (log) log->record(step, Phase::OfflineIterative, "multiscale", loss);
    }
    if (observer) observer(step, temporal_phase, params);
  }
}

ParameterStore online_finetune(const VideoSequence& seq, const ParameterStore& params,
                               const TrainSchedule& schedule, bool lucid, LossLog* log) {
  schedule.validate();
  check_delta(params, schedule);
  if (!seq.has_gt(0)) throw DataError("online fine-tuning needs a mask for frame 0 of " + seq.name);
  ParameterStore ps = params;
  if (schedule.online_iterations == 0) return ps;
  FreezeScope freeze(ps, true, true, false);

  const auto set = build_online_set(seq.frames[0], *seq.gt_masks[0], schedule.online_set_size,
                                    schedule.seed ^ kOnlineStream, lucid);
  // The generator is frozen, so every entry's temporal features are fixed.
  std::vector<std::vector<ag::Var>> pyramids;
  {
    ag::NoGradGuard guard;
    ForwardContext gctx{ps, NormMode::RunningStatistics};
    for (const auto& [frame, mask] : set) {
      ClipWindow window{schedule.delta, std::vector<Frame>(schedule.delta, frame)};
      std::vector<ag::Var> pyr;
      for (const ag::Var& v : temporal_features(gctx, window.stacked(), frame.height(),
                                                frame.width())) {
        pyr.push_back(v.detach());
      }
      pyramids.push_back(std::move(pyr));
    }
  }

  Sgd opt(Group::Spatial, schedule.online_lr, schedule.momentum, schedule.weight_decay);
  Rng rng(schedule.seed ^ kOnlineStream ^ 0x1);
  const int n = static_cast<int>(set.size());
  for (int it = 0; it < schedule.online_iterations; ++it) {
    std::vector<Tensor> frames;
    std::vector<Mask> gts;
    std::vector<std::vector<Tensor>> levels(3);
    for (int b = 0; b < schedule.online_batch; ++b) {
      const int i = rng.uniform_int(0, n - 1);
      frames.push_back(set[i].first.pixels());
      gts.push_back(set[i].second);
      for (int l = 0; l < 3; ++l) levels[l].push_back(pyramids[i][l].value());
    }
    std::vector<ag::Var> pyramid;
    for (int l = 0; l < 3; ++l) pyramid.push_back(ag::constant(stack_batch(levels[l])));
    const double loss = spatial_step(ps, opt, NormMode::RunningStatistics, stack_batch(frames),
                                     pyramid, gts, schedule.reduction);
    if (log) log->record(it, Phase::Online, "multiscale", loss);
  }
  return ps;
}

std::vector<Mask> segment_video(const VideoSequence& seq, const ParameterStore& params) {
  seq.validate();
  ag::NoGradGuard guard;
  // Running statistics never write to the store.
  ParameterStore& ps = const_cast<ParameterStore&>(params);
  ForwardContext ctx{ps, NormMode::RunningStatistics};
  std::vector<Mask> out;
  for (int t = 0; t < seq.size(); ++t) {
    if (t == 0 && seq.has_gt(0)) {
      out.push_back(seq.gt_masks[0]->with_ground_truth(false));
      continue;
    }
    const ClipWindow window = make_clip_window(seq, t, params.delta);
    const Frame& frame = seq.frames[t];
    const auto pyramid = temporal_features(ctx, window.stacked(), frame.height(), frame.width());
    out.push_back(segmentation_forward(ctx, ag::constant(frame.pixels()), pyramid).final_mask());
  }
  return out;
}

}  // namespace stcnn
