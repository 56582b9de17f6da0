#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "campseg/nn/tensor.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

struct AdamMoments {
  std::vector<real> m;
  std::vector<real> v;
};

/// Named parameters with freeze flags, AdamW state and run metadata.
/// Parameters are kept in name order so serialisation is canonical.
class ModelCheckpoint {
 public:
  /// Adds a parameter. Frozen parameters never require gradients.
  Tensor& add(const std::string& name, Tensor value, bool frozen = false);

  bool contains(const std::string& name) const { return params_.contains(name); }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  /// Parameter if present, otherwise an undefined tensor.
  Tensor find(const std::string& name) const;

  bool frozen(const std::string& name) const;
  void set_frozen(const std::string& name, bool frozen);
  /// Freezes or unfreezes every parameter whose name starts with `prefix`.
  void set_frozen_prefix(const std::string& prefix, bool frozen);

  const std::map<std::string, Tensor>& params() const { return params_; }
  std::vector<std::string> names() const;
  std::size_t parameter_count(bool trainable_only = false) const;

  void zero_grad();

  // Optimizer state; only unfrozen parameters ever get an entry.
  std::map<std::string, AdamMoments> moments;
  std::uint64_t adam_step = 0;

  std::string kind;       // "adapter", "unet" or "edsr"
  std::string config;     // model config serialised as key=value lines
  std::int64_t epoch = -1;
  double val_metric = 0.0;
  std::uint64_t seed = 0;

  /// Deep copy: values, flags and optimizer state; no gradients.
  ModelCheckpoint clone() const;

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, bool> frozen_;
};

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Raw little-endian bytes of every parameter whose name starts with `prefix`,
/// concatenated in name order. Used for bit-exact freeze checks.
std::vector<std::uint8_t> parameter_bytes(const ModelCheckpoint& ckpt, const std::string& prefix);

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
