#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "canet/canet_model.hpp"
#include "canet/optimizer.hpp"

namespace canet {

struct CheckpointRecord {
  std::string name;
  Tensor value;
};

/// Parameters, momentum buffers, batch-norm running statistics, iteration
/// and the config text of a run.
///
/// Binary layout (little endian): "CANT", u16 version, u64 iteration,
/// u32 length + config text, u32 record count, then per record u32 name
/// length, name, four u32 dims and the f64 values.
struct Checkpoint {
  static constexpr std::uint16_t kVersion = 1;

  std::uint64_t iteration = 0;
  std::string config_text;
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const;
};

/// Records are named "param/<p>", "momentum/<p>", "bn_mean/<s>" and
/// "bn_var/<s>" in graph order. Missing momentum buffers are stored as zeros.
Checkpoint capture_checkpoint(const CanetModel& model,
                              const SgdOptimizer* optimizer,
                              std::uint64_t iteration,
                              std::string config_text);

/// Copies parameters and running statistics into `model` (and momentum into
/// `optimizer` when given). Throws ShapeError on a missing record or a shape
/// mismatch.
void restore_checkpoint(const Checkpoint& ckpt, CanetModel& model,
                        SgdOptimizer* optimizer = nullptr);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace canet
