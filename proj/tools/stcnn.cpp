// Command line entry point: training phases, segmentation, evaluation and
// synthetic data generation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stcnn/config.hpp"
#include "stcnn/data_model.hpp"
#include "stcnn/errors.hpp"
#include "stcnn/metrics.hpp"
#include "stcnn/model.hpp"
#include "stcnn/synthetic.hpp"
#include "stcnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace stcnn;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kConfig = 2, kMissingData = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<int> iterations;
  bool disable_attention = false;
  bool disable_temporal = false;
  bool disable_lucid = false;
  std::vector<std::string> overrides;  // key=value
  // segment
  std::vector<std::string> sequences;
  // evaluate
  std::string predictions;
  std::string gt;
};

RunConfig resolve(const Options& o) {
  RunConfig c;
  if (!o.config.empty()) c.merge_file(o.config);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) c.schedule.seed = *o.seed;
  if (o.output) c.output_dir = *o.output;
  if (o.iterations) c.schedule.online_iterations = *o.iterations;
  if (o.disable_attention) c.attention = false;
  if (o.disable_temporal) c.temporal = false;
  if (o.disable_lucid) c.lucid = false;
  if (!o.sequences.empty()) c.sequences = o.sequences;
  c.schedule.validate();
  return c;
}

std::vector<std::string> sequence_names(const RunConfig& c) {
  if (!c.sequences.empty()) return c.sequences;
  const fs::path dir = c.dataset_root / "JPEGImages" / c.resolution;
  if (!fs::is_directory(dir)) throw NotFound("missing dataset directory " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw EmptySequence("no sequences under " + dir.string());
  return names;
}

std::vector<VideoSequence> load_dataset(const RunConfig& c) {
  std::vector<VideoSequence> out;
  for (const auto& name : sequence_names(c)) {
    out.push_back(load_sequence(c.dataset_root, name, c.resolution));
  }
  return out;
}

ParameterStore model_for(const RunConfig& c, bool require_checkpoint) {
  ParameterStore ps;
  if (!c.checkpoint.empty()) {
    if (!fs::exists(c.checkpoint)) throw NotFound("missing checkpoint " + c.checkpoint.string());
    ps = ParameterStore::load(c.checkpoint);
    if (ps.delta != c.schedule.delta) {
      throw ConfigError("checkpoint delta " + std::to_string(ps.delta) +
                        " differs from configured delta " + std::to_string(c.schedule.delta));
    }
    ps.attention = ps.attention && c.attention;
    ps.temporal = ps.temporal && c.temporal;
  } else if (require_checkpoint) {
    throw ConfigError("this command needs `checkpoint = <path>`");
  } else {
    ModelOptions mo;
    mo.profile = c.scale_profile;
    mo.delta = c.schedule.delta;
    mo.seed = c.schedule.seed;
    mo.attention = c.attention;
    mo.temporal = c.temporal;
    ps = init_parameters(mo);
  }
  return ps;
}

void save_checkpoint(const RunConfig& c, const ParameterStore& ps, const std::string& name) {
  fs::create_directories(c.output_dir);
  const fs::path out = c.output_dir / (name + ".ckpt");
  if (!c.checkpoint.empty() && fs::exists(out) && fs::equivalent(out, c.checkpoint)) {
    throw ConfigError("refusing to overwrite the input checkpoint " + out.string());
  }
  ps.save(out);
  std::printf("checkpoint %s\n", out.string().c_str());
}

LossLog open_log(const RunConfig& c) {
  fs::create_directories(c.output_dir);
  return LossLog(c.output_dir / "losses.csv");
}

int cmd_pretrain_temporal(const RunConfig& c) {
  ParameterStore ps = model_for(c, false);
  const auto data = load_dataset(c);
  LossLog log = open_log(c);
  pretrain_temporal(data, ps, c.schedule, &log);
  save_checkpoint(c, ps, "pretrain_temporal");
  return kOk;
}

int cmd_pretrain_spatial(const RunConfig& c) {
  ParameterStore ps = model_for(c, false);
  const ImageSet images = annotated_frames(load_dataset(c));
  LossLog log = open_log(c);
  pretrain_spatial(images, ps, c.schedule, &log);
  save_checkpoint(c, ps, "pretrain_spatial");
  return kOk;
}

int cmd_train_offline(const RunConfig& c) {
  ParameterStore ps = model_for(c, true);
  const auto data = load_dataset(c);
  LossLog log = open_log(c);
  offline_iterative_train(data, ps, c.schedule, &log);
  save_checkpoint(c, ps, "offline");
  return kOk;
}

int cmd_segment(const RunConfig& c) {
  const ParameterStore base = model_for(c, true);
  LossLog log = open_log(c);
  for (const auto& name : sequence_names(c)) {
    const VideoSequence seq = load_sequence(c.dataset_root, name, c.resolution);
    VideoSequence annotated = seq;
    // Only the first annotation is an input; later masks must not leak in.
    for (std::size_t t = 1; t < annotated.gt_masks.size(); ++t) annotated.gt_masks[t].reset();
    const ParameterStore tuned =
        seq.size() > 1 ? online_finetune(annotated, base, c.schedule, c.lucid, &log) : base;
    const auto masks = segment_video(annotated, tuned);
    const fs::path dir = c.output_dir / "masks" / name;
    fs::create_directories(dir);
    for (int t = 0; t < seq.size(); ++t) {
      write_mask_png(dir / (seq.stems[t] + ".png"), masks[t]);
    }
    std::printf("segmented %s (%d frames) -> %s\n", name.c_str(), seq.size(),
                dir.string().c_str());
  }
  return kOk;
}

std::vector<fs::path> mask_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFound("missing mask directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptySequence("no masks in " + dir.string());
  return files;
}

int cmd_evaluate(const RunConfig& c, const Options& o) {
  if (o.predictions.empty() || o.gt.empty()) {
    throw ConfigError("evaluate needs --predictions and --gt");
  }
  const fs::path pred_root = o.predictions, gt_root = o.gt;
  std::vector<std::string> names = c.sequences;
  if (names.empty()) {
    if (!fs::is_directory(pred_root)) throw NotFound("missing " + pred_root.string());
    for (const auto& e : fs::directory_iterator(pred_root)) {
      if (e.is_directory()) names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
  }
  if (names.empty()) throw EmptySequence("no prediction sequences under " + pred_root.string());
  std::vector<MetricsReport> reports;
  for (const auto& name : names) {
    std::vector<Mask> pred, ref;
    for (const fs::path& g : mask_files(gt_root / name)) {
      const fs::path p = pred_root / name / g.filename();
      if (!fs::exists(p)) throw NotFound("missing prediction " + p.string());
      ref.push_back(read_mask_png(g, true));
      pred.push_back(read_mask_png(p, false));
    }
    reports.push_back(evaluate(pred, ref, {}, name));
  }
  fs::create_directories(c.output_dir);
  write_per_frame_csv(c.output_dir / "per_frame.csv", reports);
  const Summary s = summarize(reports);
  write_summary_csv(c.output_dir / "summary.csv", s);
  std::cout << format_summary(s);
  return kOk;
}

int cmd_make_synthetic(const RunConfig& c) {
  SyntheticOptions so;
  so.sequences = c.synthetic_sequences;
  so.frames = c.synthetic_frames;
  so.height = c.synthetic_height;
  so.width = c.synthetic_width;
  so.seed = c.schedule.seed;
  for (const VideoSequence& seq : make_synthetic_dataset(so)) {
    write_sequence(c.dataset_root, c.resolution, seq);
  }
  std::printf("wrote %d sequences to %s\n", so.sequences, c.dataset_root.string().c_str());
  return kOk;
}

int fail(int code, const char* category, const std::string& message) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::fprintf(stderr, "error: %s: %s\n", category, line.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-branch spatiotemporal video object segmentation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--output", o.output, "output directory");
    sub->add_option("--iterations", o.iterations, "online fine-tuning iterations");
    sub->add_flag("--disable-attention", o.disable_attention, "drop mask-guided attention");
    sub->add_flag("--disable-temporal-branch", o.disable_temporal,
                  "feed zero temporal features");
    sub->add_flag("--disable-lucid", o.disable_lucid,
                  "basic augmentation instead of lucid synthesis");
    sub->add_option("--set", o.overrides, "extra key=value assignment (repeatable)")
        ->allow_extra_args(false);
  };

  CLI::App* pt = app.add_subcommand("pretrain-temporal", "adversarial temporal pretraining");
  CLI::App* ps = app.add_subcommand("pretrain-spatial", "spatial branch pretraining");
  CLI::App* off = app.add_subcommand("train-offline", "iterative offline training");
  CLI::App* seg = app.add_subcommand("segment", "online fine-tuning and segmentation");
  CLI::App* ev = app.add_subcommand("evaluate", "J / F / T evaluation");
  CLI::App* syn = app.add_subcommand("make-synthetic", "write a moving-square dataset");
  for (CLI::App* sub : {pt, ps, off, seg, ev, syn}) common(sub);
  seg->add_option("sequences", o.sequences, "sequences to segment (default: all)");
  ev->add_option("--predictions", o.predictions, "directory of <sequence>/<stem>.png masks");
  ev->add_option("--gt", o.gt, "directory of <sequence>/<stem>.png ground truth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfig, "config", e.what());
  }

  try {
    const RunConfig c = resolve(o);
    if (pt->parsed()) return cmd_pretrain_temporal(c);
    if (ps->parsed()) return cmd_pretrain_spatial(c);
    if (off->parsed()) return cmd_train_offline(c);
    if (seg->parsed()) return cmd_segment(c);
    if (ev->parsed()) return cmd_evaluate(c, o);
    if (syn->parsed()) return cmd_make_synthetic(c);
  } catch (const ConfigError& e) {
    return fail(kConfig, e.category(), e.what());
  } catch (const ArgumentError& e) {
    return fail(kConfig, e.category(), e.what());
  } catch (const NotFound& e) {
    return fail(kMissingData, e.category(), e.what());
  } catch (const EmptySequence& e) {
    return fail(kMissingData, e.category(), e.what());
  } catch (const DataError& e) {
    return fail(kMissingData, e.category(), e.what());
  } catch (const Error& e) {
    return fail(kRuntime, e.category(), e.what());
  } catch (const std::exception& e) {
    return fail(kRuntime, "runtime", e.what());
  }
  return kRuntime;
}
