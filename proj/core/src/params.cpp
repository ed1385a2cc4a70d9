#include "stcnn/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "stcnn/errors.hpp"

namespace stcnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

const char* group_name(Group g) {
  switch (g) {
    case Group::Generator: return "generator";
    case Group::Discriminator: return "discriminator";
    case Group::Spatial: return "spatial";
  }
  return "?";
}

const char* profile_name(ScaleProfile p) {
  switch (p) {
    case ScaleProfile::Tiny: return "tiny";
    case ScaleProfile::Small: return "small";
    case ScaleProfile::Full: return "full";
  }
  return "?";
}

ScaleProfile parse_profile(const std::string& s) {
  if (s == "tiny") return ScaleProfile::Tiny;
  if (s == "small") return ScaleProfile::Small;
  if (s == "full") return ScaleProfile::Full;
  throw ConfigError("unknown scale_profile '" + s + "'");
}

ParameterStore::ParameterStore(const ParameterStore& other) { *this = other; }

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this == &other) return *this;
  entries_.clear();
  for (const auto& [name, e] : other.entries_) {
    entries_[name] = Entry{ag::Var(e.var.value(), e.var.requires_grad()), e.group, e.trainable};
  }
  std::memcpy(frozen_, other.frozen_, sizeof frozen_);
  profile = other.profile;
  delta = other.delta;
  seed = other.seed;
  attention = other.attention;
  temporal = other.temporal;
  return *this;
}

void ParameterStore::add(const std::string& name, Group group, Tensor init, bool trainable) {
  if (entries_.count(name)) throw ArgumentError("duplicate parameter name " + name);
  const bool grad = trainable && !frozen(group);
  entries_.emplace(name, Entry{ag::Var(std::move(init), grad), group, trainable});
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter " + name);
  return it->second;
}

const ag::Var& ParameterStore::var(const std::string& name) const { return entry(name).var; }

Tensor& ParameterStore::buffer(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter " + name);
  return it->second.var.mutable_value();
}

void ParameterStore::set_frozen(Group g, bool frozen) {
  frozen_[static_cast<int>(g)] = frozen;
  for (auto& [name, e] : entries_) {
    if (e.group == g && e.trainable) {
      e.var.node()->requires_grad = !frozen;
      e.var.zero_grad();
    }
  }
}

void ParameterStore::zero_grad() {
  for (auto& [name, e] : entries_) e.var.zero_grad();
}

std::size_t ParameterStore::parameter_count(Group g) const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) {
    if (e.group == g && e.trainable) n += e.var.value().size();
  }
  return n;
}

std::map<std::string, std::vector<double>> ParameterStore::snapshot(Group g) const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, e] : entries_) {
    if (e.group == g) out[name] = e.var.value().storage();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint container:
//   "STCNNCKP" | u32 version | u64 manifest_len | manifest JSON |
//   u64 count | { u32 name_len | name | u8 group | u8 trainable |
//                 i32 n,c,h,w | f64 values... }*

namespace {

constexpr char kMagic[8] = {'S', 'T', 'C', 'N', 'N', 'C', 'K', 'P'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("truncated checkpoint");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> ParameterStore::serialize() const {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["scale_profile"] = profile_name(profile);
  manifest["delta"] = delta;
  manifest["seed"] = seed;
  manifest["attention"] = attention;
  manifest["temporal"] = temporal;
  manifest["frozen"] = {frozen_[0], frozen_[1], frozen_[2]};
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put<std::uint64_t>(out, entries_.size());
  for (const auto& [name, e] : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.group));
    put<std::uint8_t>(out, e.trainable ? 1 : 0);
    const Shape& s = e.var.value().shape();
    put<std::int32_t>(out, s.n);
    put<std::int32_t>(out, s.c);
    put<std::int32_t>(out, s.h);
    put<std::int32_t>(out, s.w);
    const auto* p = reinterpret_cast<const std::uint8_t*>(e.var.value().data());
    out.insert(out.end(), p, p + e.var.value().size() * sizeof(double));
  }
  return out;
}

ParameterStore ParameterStore::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(8) != std::string(kMagic, 8)) throw FormatError("not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto manifest_len = r.get<std::uint64_t>();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(r.str(manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what());
  }
  ParameterStore store;
  try {
    store.profile = parse_profile(manifest.at("scale_profile").get<std::string>());
    store.delta = manifest.at("delta").get<int>();
    store.seed = manifest.at("seed").get<std::uint64_t>();
    store.attention = manifest.at("attention").get<bool>();
    store.temporal = manifest.at("temporal").get<bool>();
    for (int i = 0; i < 3; ++i) store.frozen_[i] = manifest.at("frozen").at(i).get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.get<std::uint32_t>());
    const auto group = r.get<std::uint8_t>();
    if (group > 2) throw FormatError("bad parameter group in checkpoint");
    const bool trainable = r.get<std::uint8_t>() != 0;
    Shape s;
    s.n = r.get<std::int32_t>();
    s.c = r.get<std::int32_t>();
    s.h = r.get<std::int32_t>();
    s.w = r.get<std::int32_t>();
    Tensor t(s);
    r.raw(t.data(), t.size() * sizeof(double));
    store.add(name, static_cast<Group>(group), std::move(t), trainable);
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  return store;
}

void ParameterStore::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

ParameterStore ParameterStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("missing checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace stcnn
