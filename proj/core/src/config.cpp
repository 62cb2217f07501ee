#include "longsteer/config.hpp"

#include <cmath>
#include <fstream>

#include "longsteer/binary_io.hpp"
#include "longsteer/error.hpp"
#include "longsteer/pipeline.hpp"

namespace longsteer {

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, std::string("config field '") + key + "': " + e.what());
  }
}

void read_path(const nlohmann::json& j, const char* key, std::filesystem::path& out) {
  std::string s;
  read_opt(j, key, s);
  if (!s.empty()) out = s;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::kConfigError, "config must be a JSON object");
  RunConfig c;
  read_opt(j, "backend", c.backend);
  read_opt(j, "model_id", c.model_id);
  if (j.contains("backend_options")) c.backend_options = j["backend_options"];
  if (j.contains("layer") && !j["layer"].is_null()) {
    const auto& l = j["layer"];
    if (l.is_string()) {
      if (l.get<std::string>() != "middle") {
        throw Error(Errc::kConfigError, "layer must be an integer or \"middle\"");
      }
    } else if (l.is_number_integer()) {
      c.layer = l.get<int>();
    } else {
      throw Error(Errc::kConfigError, "layer must be an integer or \"middle\"");
    }
  }
  read_opt(j, "lambda_p", c.lambda_p);
  read_opt(j, "lambda_d", c.lambda_d);
  read_opt(j, "k", c.k);
  if (j.contains("domain_phase")) {
    std::string phase;
    read_opt(j, "domain_phase", phase);
    try {
      c.domain_phase = parse_edit_phase(phase);
    } catch (const Error& e) {
      throw Error(Errc::kConfigError, e.what());
    }
  }
  read_opt(j, "max_new_tokens", c.max_new_tokens);
  read_opt(j, "include_instruction", c.include_instruction);
  read_opt(j, "seed", c.seed);
  read_path(j, "examples", c.examples);
  read_path(j, "items", c.items);
  read_path(j, "records", c.records);
  read_path(j, "pattern", c.pattern);
  read_path(j, "out", c.out);
  if (j.contains("memories")) {
    if (!j["memories"].is_object()) throw Error(Errc::kConfigError, "memories must map domain to path");
    for (const auto& [domain, path] : j["memories"].items()) {
      c.memories[domain] = path.get<std::string>();
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const auto text = bin::read_file(path);
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kConfigError, path.string() + " is not valid JSON");
  auto c = from_json(j);
  c.resolve_paths(path.parent_path().empty() ? std::filesystem::current_path()
                                             : std::filesystem::absolute(path.parent_path()));
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json mem = nlohmann::json::object();
  for (const auto& [d, p] : memories) mem[d] = p.string();
  return {{"backend", backend},
          {"model_id", model_id},
          {"backend_options", backend_options},
          {"layer", layer ? nlohmann::json(*layer) : nlohmann::json("middle")},
          {"lambda_p", lambda_p},
          {"lambda_d", lambda_d},
          {"k", k},
          {"domain_phase", std::string(to_string(domain_phase))},
          {"max_new_tokens", max_new_tokens},
          {"include_instruction", include_instruction},
          {"seed", seed},
          {"examples", examples.string()},
          {"items", items.string()},
          {"records", records.string()},
          {"pattern", pattern.string()},
          {"memories", mem},
          {"out", out.string()}};
}

void RunConfig::resolve_paths(const std::filesystem::path& base) {
  const auto fix = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  };
  fix(examples);
  fix(items);
  fix(records);
  fix(pattern);
  fix(out);
  for (auto& [d, p] : memories) fix(p);
}

int RunConfig::resolved_layer(int num_layers) const {
  return layer ? *layer : default_layer(num_layers);
}

InjectionConfig RunConfig::injection(int num_layers) const {
  InjectionConfig inj;
  inj.lambda_p = lambda_p;
  inj.lambda_d = lambda_d;
  inj.k = k;
  inj.layer = resolved_layer(num_layers);
  inj.domain_phase = domain_phase;
  return inj;
}

void RunConfig::validate() const {
  if (k < 1) throw Error(Errc::kConfigError, "k must be >= 1");
  if (max_new_tokens < 1) throw Error(Errc::kConfigError, "max_new_tokens must be >= 1");
  if (!std::isfinite(lambda_p) || !std::isfinite(lambda_d)) {
    throw Error(Errc::kConfigError, "injection strengths must be finite");
  }
  if (layer && *layer < 0) throw Error(Errc::kConfigError, "layer must be non-negative");
}

std::filesystem::path write_config_snapshot(const RunConfig& cfg, const std::filesystem::path& output,
                                            const nlohmann::json& extra) {
  std::filesystem::path snap;
  if (std::filesystem::is_directory(output)) {
    snap = output / "config.json";
  } else {
    snap = output;
    snap += ".config.json";
  }
  auto j = cfg.to_json();
  if (extra.is_object()) {
    for (const auto& [key, v] : extra.items()) j[key] = v;
  }
  bin::write_file(snap, j.dump(2) + "\n");
  return snap;
}

}  // namespace longsteer
