#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "longsteer/backend.hpp"
#include "longsteer/repr.hpp"

namespace longsteer {

// Settings shared by every command. Loaded from one JSON file, then
// overridden field by field from the command line.
struct RunConfig {
  std::string backend = "transformer";
  std::string model_id;
  nlohmann::json backend_options = nlohmann::json::object();
  std::optional<int> layer;  // empty means the middle layer
  double lambda_p = 0.1;
  double lambda_d = 0.1;
  int k = 8;
  EditPhase domain_phase = EditPhase::kPrefillOnly;
  int max_new_tokens = 4096;
  bool include_instruction = false;
  unsigned seed = 0;

  std::filesystem::path examples;
  std::filesystem::path items;
  std::filesystem::path records;
  std::filesystem::path pattern;
  std::map<std::string, std::filesystem::path> memories;  // domain -> file
  std::filesystem::path out;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  // Layer "middle" (or absent) serializes as the string "middle" until
  // resolved against a backend.
  nlohmann::json to_json() const;

  // Relative paths become absolute against `base`.
  void resolve_paths(const std::filesystem::path& base);
  int resolved_layer(int num_layers) const;
  InjectionConfig injection(int num_layers) const;
  void validate() const;
};

// Writes "<stem>.config.json" beside `output`, or "config.json" inside it
// when `output` is a directory.
std::filesystem::path write_config_snapshot(const RunConfig& cfg, const std::filesystem::path& output,
                                            const nlohmann::json& extra = {});

}  // namespace longsteer
