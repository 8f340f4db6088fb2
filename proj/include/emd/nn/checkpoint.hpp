#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "emd/nn/tape.hpp"

namespace emd::nn {

// CKPT1 container:
//   "EMDCKPT1" | u64 LE header length | UTF-8 JSON header | float32 LE blob
// The header is {format_version, arch_id, config, seed, step,
// tensor_index: [{name, shape, offset}]} with byte offsets into the blob.
inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'D', 'C', 'K', 'P', 'T', '1'};
inline constexpr int kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string arch_id;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Bytes of a checkpoint; the file functions are thin wrappers over these.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

// Snapshot of a model's parameters, in store order.
Checkpoint make_checkpoint(const ParameterStore<float>& params, std::string arch_id,
                           nlohmann::json config, std::uint64_t seed, std::uint64_t step);

// Copies tensors into the constructed architecture. Every parameter must be
// present with an identical shape and no extra tensors are allowed.
void load_parameters(const Checkpoint& ckpt, ParameterStore<float>& params);

}  // namespace emd::nn
