#include "campseg/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "campseg/error.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'C', 'S', 'E', 'G'};
constexpr std::uint32_t kVersion = 1;

const std::string kMomentM = "@adam.m/";
const std::string kMomentV = "@adam.v/";
const std::string kStep = "@adam.step";
const std::string kEpoch = "@meta.epoch";
const std::string kMetric = "@meta.val_metric";
const std::string kSeed = "@meta.seed";
const std::string kKind = "@meta.kind";
const std::string kConfig = "@meta.config";

struct Entry {
  std::string name;
  Shape shape;
  bool frozen = false;
  std::vector<real> values;
};

// Reserved entries carry non-float metadata; integers are split into 16-bit
// chunks so every value is exactly representable in float32.
std::vector<real> u64_chunks(std::uint64_t v) {
  return {static_cast<real>(v & 0xFFFF), static_cast<real>((v >> 16) & 0xFFFF), static_cast<real>((v >> 32) & 0xFFFF),
          static_cast<real>(v >> 48)};
}

std::uint64_t from_chunks(const std::vector<real>& c) {
  if (c.size() != 4) fail(ErrorCode::MalformedFile, "integer metadata entry must have 4 chunks");
  std::uint64_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 16) | static_cast<std::uint64_t>(c[i]);
  return v;
}

std::vector<real> text_codes(const std::string& s) {
  std::vector<real> out;
  for (unsigned char ch : s) out.push_back(static_cast<real>(ch));
  return out;
}

std::string from_codes(const std::vector<real>& c) {
  std::string s;
  for (real f : c) s.push_back(static_cast<char>(static_cast<unsigned char>(f)));
  return s;
}

std::vector<real> double_halves(double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  return u64_chunks(bits);
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::MalformedFile, std::string("truncated ") + what);
  return v;
}

}  // namespace

Tensor& ModelCheckpoint::add(const std::string& name, Tensor value, bool frozen) {
  if (name.empty() || name[0] == '@') fail(ErrorCode::ShapeMismatch, "invalid parameter name '" + name + "'");
  value.set_requires_grad(!frozen);
  frozen_[name] = frozen;
  auto [it, inserted] = params_.insert_or_assign(name, std::move(value));
  return it->second;
}

Tensor& ModelCheckpoint::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) fail(ErrorCode::ShapeMismatch, "checkpoint has no parameter '" + name + "'");
  return it->second;
}

const Tensor& ModelCheckpoint::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) fail(ErrorCode::ShapeMismatch, "checkpoint has no parameter '" + name + "'");
  return it->second;
}

Tensor ModelCheckpoint::find(const std::string& name) const {
  auto it = params_.find(name);
  return it == params_.end() ? Tensor() : it->second;
}

bool ModelCheckpoint::frozen(const std::string& name) const {
  auto it = frozen_.find(name);
  return it != frozen_.end() && it->second;
}

void ModelCheckpoint::set_frozen(const std::string& name, bool frozen) {
  at(name).set_requires_grad(!frozen);
  frozen_[name] = frozen;
  if (frozen) moments.erase(name);
}

void ModelCheckpoint::set_frozen_prefix(const std::string& prefix, bool frozen) {
  for (auto& [name, t] : params_)
    if (name.starts_with(prefix)) set_frozen(name, frozen);
}

std::vector<std::string> ModelCheckpoint::names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

std::size_t ModelCheckpoint::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_)
    if (!trainable_only || !frozen(name)) n += t.numel();
  return n;
}

void ModelCheckpoint::zero_grad() {
  for (auto& [name, t] : params_) {
    if (frozen(name))
      t.clear_grad();
    else
      t.zero_grad();
  }
}

ModelCheckpoint ModelCheckpoint::clone() const {
  ModelCheckpoint c;
  for (const auto& [name, t] : params_) c.add(name, t.detach().clone(), frozen(name));
  c.moments = moments;
  c.adam_step = adam_step;
  c.kind = kind;
  c.config = config;
  c.epoch = epoch;
  c.val_metric = val_metric;
  c.seed = seed;
  return c;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  std::vector<Entry> entries;
  for (const auto& [name, t] : ckpt.params())
    entries.push_back({name, t.shape(), ckpt.frozen(name), std::vector<real>(t.values().begin(), t.values().end())});
  for (const auto& [name, mv] : ckpt.moments) {
    const Shape s = ckpt.at(name).shape();
    entries.push_back({kMomentM + name, s, true, mv.m});
    entries.push_back({kMomentV + name, s, true, mv.v});
  }
  auto scalar = [&](const std::string& name, std::vector<real> v) {
    const auto n = static_cast<std::int64_t>(v.size());
    entries.push_back({name, {n}, true, std::move(v)});
  };
  scalar(kStep, u64_chunks(ckpt.adam_step));
  scalar(kEpoch, u64_chunks(static_cast<std::uint64_t>(ckpt.epoch)));
  scalar(kMetric, double_halves(ckpt.val_metric));
  scalar(kSeed, u64_chunks(ckpt.seed));
  scalar(kKind, text_codes(ckpt.kind));
  scalar(kConfig, text_codes(ckpt.config));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint64_t>(out, e.shape.size());
    for (auto d : e.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    put<std::uint8_t>(out, e.frozen ? 1 : 0);
    const std::vector<float> payload(e.values.begin(), e.values.end());
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorCode::MalformedFile, "bad checkpoint magic");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion)
    fail(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kVersion));
  const auto count = get<std::uint64_t>(in, "entry count");

  ModelCheckpoint ckpt;
  std::map<std::string, std::vector<real>> reserved;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, "name length");
    if (len > file_size) fail(ErrorCode::MalformedFile, "name length out of range");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) fail(ErrorCode::MalformedFile, "truncated name");
    const auto rank = get<std::uint64_t>(in, "rank");
    if (rank > 8) fail(ErrorCode::MalformedFile, "rank out of range in '" + name + "'");
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      const auto d = get<std::uint64_t>(in, "dimension");
      if (d > file_size) fail(ErrorCode::MalformedFile, "dimension out of range in '" + name + "'");
      shape.push_back(static_cast<std::int64_t>(d));
      n *= d;
    }
    if (n * 4 > file_size) fail(ErrorCode::MalformedFile, "payload of '" + name + "' exceeds file size");
    const bool frozen = get<std::uint8_t>(in, "freeze flag") != 0;
    std::vector<float> payload(n);
    if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n * 4)))
      fail(ErrorCode::MalformedFile, "truncated payload of '" + name + "'");
    std::vector<real> values(payload.begin(), payload.end());
    if (name.starts_with('@'))
      reserved[name] = std::move(values);
    else
      ckpt.add(name, Tensor(std::move(shape), std::move(values)), frozen);
  }

  for (auto& [name, values] : reserved) {
    if (name.starts_with(kMomentM) || name.starts_with(kMomentV)) {
      const bool is_m = name.starts_with(kMomentM);
      const std::string param = name.substr(kMomentM.size());
      if (!ckpt.contains(param) || ckpt.at(param).numel() != values.size())
        fail(ErrorCode::MalformedFile, "optimizer state for unknown parameter '" + param + "'");
      (is_m ? ckpt.moments[param].m : ckpt.moments[param].v) = std::move(values);
    } else if (name == kStep) {
      ckpt.adam_step = from_chunks(values);
    } else if (name == kEpoch) {
      ckpt.epoch = static_cast<std::int64_t>(from_chunks(values));
    } else if (name == kMetric) {
      ckpt.val_metric = std::bit_cast<double>(from_chunks(values));
    } else if (name == kSeed) {
      ckpt.seed = from_chunks(values);
    } else if (name == kKind) {
      ckpt.kind = from_codes(values);
    } else if (name == kConfig) {
      ckpt.config = from_codes(values);
    }
  }
  return ckpt;
}

std::vector<std::uint8_t> parameter_bytes(const ModelCheckpoint& ckpt, const std::string& prefix) {
  std::vector<std::uint8_t> out;
  for (const auto& [name, t] : ckpt.params()) {
    if (!name.starts_with(prefix)) continue;
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    out.insert(out.end(), p, p + t.numel() * sizeof(real));
  }
  return out;
}

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
