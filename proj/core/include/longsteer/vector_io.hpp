#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "longsteer/repr.hpp"

namespace longsteer {

// GLRV container layout (all integers little-endian):
//
//   "GLRV" | version u32 | kind u8 | layer u32 | dim u32 | count u32 | payload
//
// kind 0/1 hold a single PATTERN/DOMAIN vector: count is source_count and the
// payload is dim float32 values. kind 2 holds a record set: count records of
//   cot_kind u8 | layer u32 | example_id (u32 len + UTF-8) | domain (same) |
//   dim float32
// and the header layer is the shared layer, or 0xFFFFFFFF when mixed.
inline constexpr std::uint32_t kGlrvVersion = 1;
inline constexpr std::uint8_t kGlrvRecordSet = 2;
inline constexpr std::uint32_t kMixedLayers = 0xFFFFFFFFu;

std::string encode_steering_vector(const SteeringVector& v);
SteeringVector decode_steering_vector(std::string_view bytes);

std::string encode_records(std::span<const RepresentationRecord> records);
std::vector<RepresentationRecord> decode_records(std::string_view bytes);

// Sidecar "<path>.json" carries model_id, created (UTC ISO-8601) and any
// extra fields given.
void save_steering_vector(const std::filesystem::path& path, const SteeringVector& v,
                          const std::string& model_id, const nlohmann::json& extra = {});
SteeringVector load_steering_vector(const std::filesystem::path& path);

void save_records(const std::filesystem::path& path,
                  std::span<const RepresentationRecord> records);
std::vector<RepresentationRecord> load_records(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);
nlohmann::json read_sidecar(const std::filesystem::path& path);
std::string utc_timestamp();

}  // namespace longsteer
