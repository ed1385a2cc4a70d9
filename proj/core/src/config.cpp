#include "stcnn/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "stcnn/errors.hpp"

namespace stcnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define INT_FIELD(name, member)                                                         \
  {name,                                                                                \
   {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_int(k, v); }, \
    [](const RunConfig& c) { return std::to_string(c.member); }}}
#define REAL_FIELD(name, member)                                                           \
  {name,                                                                                   \
   {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
    [](const RunConfig& c) { return fmt(c.member); }}}
#define BOOL_FIELD(name, member)                                                          \
  {name,                                                                                  \
   {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
    [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"dataset_root",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.dataset_root = v; },
        [](const RunConfig& c) { return c.dataset_root.string(); }}},
      {"resolution",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.resolution = v; },
        [](const RunConfig& c) { return c.resolution; }}},
      {"sequences",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.sequences = to_list(v); },
        [](const RunConfig& c) {
          std::string s;
          for (const auto& n : c.sequences) s += (s.empty() ? "" : ",") + n;
          return s;
        }}},
      {"output_dir",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
        [](const RunConfig& c) { return c.output_dir.string(); }}},
      {"checkpoint",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; },
        [](const RunConfig& c) { return c.checkpoint.string(); }}},
      {"scale_profile",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.scale_profile = parse_profile(v);
        },
        [](const RunConfig& c) { return std::string(profile_name(c.scale_profile)); }}},
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.schedule.seed = to_u64(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.schedule.seed); }}},
      {"loss_reduction",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "sum") {
            c.schedule.reduction = LossReduction::Sum;
          } else if (v == "pixel_mean") {
            c.schedule.reduction = LossReduction::PixelMean;
          } else {
            throw ConfigError(k + ": expected sum or pixel_mean, got '" + v + "'");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.schedule.reduction == LossReduction::Sum ? "sum" : "pixel_mean");
        }}},
      BOOL_FIELD("attention", attention),
      BOOL_FIELD("temporal", temporal),
      BOOL_FIELD("lucid", lucid),
      INT_FIELD("delta", schedule.delta),
      REAL_FIELD("lambda_adv", schedule.lambda_adv),
      REAL_FIELD("pretrain_lr_generator", schedule.pretrain_lr_generator),
      REAL_FIELD("pretrain_lr_discriminator", schedule.pretrain_lr_discriminator),
      INT_FIELD("pretrain_batch", schedule.pretrain_batch),
      INT_FIELD("pretrain_temporal_steps", schedule.pretrain_temporal_steps),
      BOOL_FIELD("flip_clips", schedule.flip_clips),
      REAL_FIELD("spatial_lr", schedule.spatial_lr),
      INT_FIELD("spatial_batch", schedule.spatial_batch),
      INT_FIELD("pretrain_spatial_steps", schedule.pretrain_spatial_steps),
      BOOL_FIELD("augment_images", schedule.augment_images),
      REAL_FIELD("offline_lr_generator", schedule.offline_lr_generator),
      REAL_FIELD("offline_lr_discriminator", schedule.offline_lr_discriminator),
      REAL_FIELD("offline_lr_spatial", schedule.offline_lr_spatial),
      INT_FIELD("offline_batch", schedule.offline_batch),
      INT_FIELD("offline_steps", schedule.offline_steps),
      INT_FIELD("alternation", schedule.alternation),
      REAL_FIELD("online_lr", schedule.online_lr),
      INT_FIELD("online_batch", schedule.online_batch),
      INT_FIELD("online_iterations", schedule.online_iterations),
      INT_FIELD("online_set_size", schedule.online_set_size),
      REAL_FIELD("momentum", schedule.momentum),
      REAL_FIELD("weight_decay", schedule.weight_decay),
      INT_FIELD("synthetic_sequences", synthetic_sequences),
      INT_FIELD("synthetic_frames", synthetic_frames),
      INT_FIELD("synthetic_height", synthetic_height),
      INT_FIELD("synthetic_width", synthetic_width),
  };
  return table;
}

#undef INT_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig c;
  c.merge_file(path);
  return c;
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::stringstream lines(ss.str());
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, field] : fields()) out.push_back(key);
    return out;
  }();
  return k;
}

}  // namespace stcnn
