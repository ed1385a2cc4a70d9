#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stcnn/params.hpp"
#include "stcnn/trainer.hpp"

namespace stcnn {

/// Everything a command needs, read from a `key = value` file. Lines starting
/// with '#' and blank lines are ignored; unknown keys and malformed values
/// raise ConfigError.
struct RunConfig {
  std::filesystem::path dataset_root = "data";
  std::string resolution = "480p";
  std::vector<std::string> sequences;  // empty: every sequence under the root
  std::filesystem::path output_dir = "out";
  std::filesystem::path checkpoint;  // input checkpoint, when a command needs one
  ScaleProfile scale_profile = ScaleProfile::Tiny;
  bool attention = true;
  bool temporal = true;
  bool lucid = true;
  TrainSchedule schedule;  // delta, lambda_adv and seed live here

  // make-synthetic
  int synthetic_sequences = 16;
  int synthetic_frames = 12;
  int synthetic_height = 64;
  int synthetic_width = 64;

  /// Applies one assignment; ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Adds assignments from a file on top of this configuration.
  void merge_file(const std::filesystem::path& path);

  /// Canonical key = value listing of the full configuration.
  std::string dump() const;

  static const std::vector<std::string>& keys();
};

}  // namespace stcnn
