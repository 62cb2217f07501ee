#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace longsteer {

// A dense tensor widened to float32 at load time.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const;
};

using TensorMap = std::map<std::string, Tensor>;

// Reads one .safetensors file. F32, F16 and BF16 payloads are supported.
TensorMap read_safetensors(const std::filesystem::path& path);

// Writes float32 tensors; used by tests and tooling.
void write_safetensors(const std::filesystem::path& path, const TensorMap& tensors);

// model.safetensors, or the shards listed in model.safetensors.index.json.
TensorMap read_checkpoint(const std::filesystem::path& model_dir);

}  // namespace longsteer
