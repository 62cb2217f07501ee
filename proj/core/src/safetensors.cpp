#include "longsteer/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "longsteer/error.hpp"

namespace longsteer {

std::int64_t Tensor::numel() const {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

namespace {

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1Fu;
  std::uint32_t mant = h & 0x3FFu;
  std::uint32_t bits = 0;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      // subnormal: renormalize
      exp = 127 - 15 + 1;
      while ((mant & 0x400u) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3FFu;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 0x1F) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

TensorMap read_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  unsigned char len_bytes[8];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) {
    throw Error(Errc::kParseError, path.string() + ": truncated safetensors header");
  }
  const auto header_len = read_u64_le(len_bytes);
  if (header_len > (1ULL << 30)) {
    throw Error(Errc::kParseError, path.string() + ": implausible header length");
  }
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(Errc::kParseError, path.string() + ": truncated safetensors header");
  }
  const auto meta = nlohmann::json::parse(header, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) {
    throw Error(Errc::kParseError, path.string() + ": header is not JSON");
  }
  const std::streamoff base = static_cast<std::streamoff>(8 + header_len);

  TensorMap out;
  for (const auto& [name, info] : meta.items()) {
    if (name == "__metadata__") continue;
    const auto dtype = info.at("dtype").get<std::string>();
    const auto offsets = info.at("data_offsets").get<std::vector<std::uint64_t>>();
    Tensor t;
    t.shape = info.at("shape").get<std::vector<std::int64_t>>();
    const auto n = static_cast<std::size_t>(t.numel());
    std::size_t width = 0;
    if (dtype == "F32") {
      width = 4;
    } else if (dtype == "F16" || dtype == "BF16") {
      width = 2;
    } else {
      throw Error(Errc::kParseError, name + ": unsupported dtype " + dtype);
    }
    if (offsets.size() != 2 || offsets[1] - offsets[0] != n * width) {
      throw Error(Errc::kParseError, name + ": data_offsets do not match shape");
    }
    std::vector<unsigned char> raw(n * width);
    in.seekg(base + static_cast<std::streamoff>(offsets[0]));
    if (!in.read(reinterpret_cast<char*>(raw.data()),
                 static_cast<std::streamsize>(raw.size()))) {
      throw Error(Errc::kParseError, name + ": truncated tensor data");
    }
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned char* p = raw.data() + i * width;
      if (width == 4) {
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                   (static_cast<std::uint32_t>(p[1]) << 8) |
                                   (static_cast<std::uint32_t>(p[2]) << 16) |
                                   (static_cast<std::uint32_t>(p[3]) << 24);
        t.data[i] = std::bit_cast<float>(bits);
      } else {
        const std::uint16_t h =
            static_cast<std::uint16_t>(p[0] | (static_cast<std::uint16_t>(p[1]) << 8));
        t.data[i] = dtype == "F16"
                        ? half_to_float(h)
                        : std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
      }
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

void write_safetensors(const std::filesystem::path& path, const TensorMap& tensors) {
  nlohmann::json meta = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(t.data.size()) * 4;
    meta[name] = {{"dtype", "F32"},
                  {"shape", t.shape},
                  {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string header = meta.dump();
  while (header.size() % 8 != 0) header.push_back(' ');
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  const std::uint64_t len = header.size();
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((len >> (8 * i)) & 0xFF));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : tensors) {
    for (float f : t.data) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int i = 0; i < 4; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
  }
  if (!out) throw Error(Errc::kIoError, "failed writing " + path.string());
}

TensorMap read_checkpoint(const std::filesystem::path& dir) {
  const auto single = dir / "model.safetensors";
  if (std::filesystem::exists(single)) return read_safetensors(single);
  const auto index_path = dir / "model.safetensors.index.json";
  if (!std::filesystem::exists(index_path)) {
    throw Error(Errc::kConfigError, "no model.safetensors in " + dir.string());
  }
  std::ifstream in(index_path);
  const auto index = nlohmann::json::parse(in, nullptr, false);
  if (index.is_discarded() || !index.contains("weight_map")) {
    throw Error(Errc::kParseError, index_path.string() + ": missing weight_map");
  }
  std::set<std::string> shards;
  for (const auto& [_, file] : index["weight_map"].items()) {
    shards.insert(file.get<std::string>());
  }
  TensorMap all;
  for (const auto& shard : shards) all.merge(read_safetensors(dir / shard));
  return all;
}

}  // namespace longsteer
