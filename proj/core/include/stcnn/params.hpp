#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stcnn/autograd.hpp"

namespace stcnn {

enum class Group : std::uint8_t { Generator = 0, Discriminator = 1, Spatial = 2 };
inline constexpr Group kAllGroups[] = {Group::Generator, Group::Discriminator,
                                       Group::Spatial};
const char* group_name(Group g);

enum class ScaleProfile { Tiny, Small, Full };
const char* profile_name(ScaleProfile p);
ScaleProfile parse_profile(const std::string& s);

inline constexpr int kCheckpointVersion = 1;

/// Named parameter arrays partitioned into freeze groups. Trainable arrays
/// are graph leaves; non-trainable arrays (normalisation statistics) are
/// plain buffers. Copies are deep.
class ParameterStore {
 public:
  struct Entry {
    ag::Var var;
    Group group = Group::Generator;
    bool trainable = true;
  };

  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  /// Registers a new array; duplicate names throw ArgumentError.
  void add(const std::string& name, Group group, Tensor init, bool trainable = true);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const ag::Var& var(const std::string& name) const;
  Tensor& buffer(const std::string& name);
  const Entry& entry(const std::string& name) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  void set_frozen(Group g, bool frozen);
  bool frozen(Group g) const { return frozen_[static_cast<int>(g)]; }

  void zero_grad();
  std::size_t parameter_count(Group g) const;

  /// Flat copy of every array (trainable and buffers) in a group.
  std::map<std::string, std::vector<double>> snapshot(Group g) const;

  /// Model manifest carried by checkpoints.
  ScaleProfile profile = ScaleProfile::Tiny;
  int delta = 4;
  std::uint64_t seed = 0;
  bool attention = true;
  bool temporal = true;

  void save(const std::filesystem::path& path) const;
  static ParameterStore load(const std::filesystem::path& path);
  std::vector<std::uint8_t> serialize() const;
  static ParameterStore deserialize(const std::vector<std::uint8_t>& bytes);

 private:
  std::map<std::string, Entry> entries_;
  bool frozen_[3] = {false, false, false};
};

}  // namespace stcnn
