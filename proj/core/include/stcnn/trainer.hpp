#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stcnn/data_model.hpp"
#include "stcnn/params.hpp"
#include "stcnn/spatial.hpp"
#include "stcnn/temporal.hpp"

namespace stcnn {

enum class Phase { PretrainTemporal, PretrainSpatial, OfflineIterative, Online };
const char* phase_name(Phase p);

/// Hyperparameters of all four phases. Defaults are the published settings;
/// desk() is a preset that lets randomly initialised tiny networks converge
/// within a few hundred steps.
struct TrainSchedule {
  int delta = 4;
  double lambda_adv = 0.001;

  double pretrain_lr_generator = 1e-7;
  double pretrain_lr_discriminator = 1e-4;
  int pretrain_batch = 3;
  int pretrain_temporal_steps = 500;
  bool flip_clips = true;

  double spatial_lr = 1e-3;
  int spatial_batch = 8;
  int pretrain_spatial_steps = 500;
  bool augment_images = true;

  double offline_lr_generator = 1e-8;
  double offline_lr_discriminator = 1e-4;
  double offline_lr_spatial = 1e-4;
  int offline_batch = 1;
  int offline_steps = 1000;  // both sub-phases together
  int alternation = 50;      // steps per sub-phase before switching

  double online_lr = 1e-4;
  int online_batch = 1;
  int online_iterations = 400;
  int online_set_size = 64;

  double momentum = 0.9;
  double weight_decay = 0.0;
  LossReduction reduction = LossReduction::PixelMean;
  std::uint64_t seed = 0;

  static TrainSchedule published() { return {}; }
  static TrainSchedule desk();

  /// ArgumentError when a rate is not positive or a count is out of range.
  void validate() const;
};

/// Append-only `step,phase,loss_name,value` log, optionally mirrored to a file.
class LossLog {
 public:
  struct Row {
    int step;
    std::string phase;
    std::string name;
    double value;
  };

  LossLog() = default;
  explicit LossLog(const std::filesystem::path& path);

  void record(int step, Phase phase, const std::string& name, double value);
  const std::vector<Row>& rows() const { return rows_; }
  /// Values of one loss name in one phase, in logging order.
  std::vector<double> series(Phase phase, const std::string& name) const;

 private:
  std::vector<Row> rows_;
  std::ofstream file_;
};

/// Image/mask pairs for the spatial pretraining phase.
using ImageSet = std::vector<std::pair<Frame, Mask>>;

/// Every annotated frame of the given sequences.
ImageSet annotated_frames(const std::vector<VideoSequence>& sequences);

/// Adversarial pretraining of generator and discriminator on full clip
/// windows (t >= delta), flipping whole clips at random. The spatial group is
/// frozen for the duration. DataError when no sequence has delta + 1 frames.
void pretrain_temporal(const std::vector<VideoSequence>& dataset, ParameterStore& params,
                       const TrainSchedule& schedule, LossLog* log = nullptr);

/// SGD on the multi-scale loss with zero temporal features; the generator and
/// discriminator are frozen. DataError on an empty dataset.
void pretrain_spatial(const ImageSet& dataset, ParameterStore& params,
                      const TrainSchedule& schedule, LossLog* log = nullptr);

/// Called after every offline step with the step index and whether it was a
/// temporal-branch step.
using OfflineObserver = std::function<void(int step, bool temporal_step, const ParameterStore&)>;

/// Alternates `alternation` adversarial steps on the temporal branch (spatial
/// frozen) with `alternation` SGD steps on the spatial branch fed by generator
/// features (generator and discriminator frozen) until `offline_steps`.
/// DataError when a sequence lacks ground truth.
void offline_iterative_train(const std::vector<VideoSequence>& dataset,
                             ParameterStore& params, const TrainSchedule& schedule,
                             LossLog* log = nullptr, const OfflineObserver& observer = {});

/// Fine-tunes the spatial branch on an online set built from frame 0 and its
/// mask; generator and discriminator stay frozen. The temporal input of a
/// synthesized frame is a window of delta copies of it. `lucid` false swaps
/// lucid synthesis for basic augmentation. DataError without a frame-0 mask.
ParameterStore online_finetune(const VideoSequence& seq, const ParameterStore& params,
                               const TrainSchedule& schedule, bool lucid = true,
                               LossLog* log = nullptr);

/// Masks for every frame; frame 0 is the annotation when present. Mask t
/// depends only on frames 0..t.
std::vector<Mask> segment_video(const VideoSequence& seq, const ParameterStore& params);

/// Temporal features for a stacked window batch, or zeros when the model has
/// its temporal branch disabled.
std::vector<ag::Var> temporal_features(ForwardContext& ctx, const Tensor& windows, int height,
                                       int width);

}  // namespace stcnn
