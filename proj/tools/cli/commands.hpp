#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "longsteer/backend.hpp"
#include "longsteer/config.hpp"
#include "longsteer/eval.hpp"
#include "longsteer/repr.hpp"

namespace longsteer::cli {

// An input file named on the command line or in the config does not exist.
// The tool maps this to exit code 2.
class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const std::filesystem::path& path)
      : std::runtime_error("input file not found: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

void require_file(const std::filesystem::path& path, const char* what);

std::unique_ptr<ModelBackend> make_backend(const RunConfig& cfg);

struct ExtractOptions {
  std::vector<CotKind> kinds{CotKind::kNone, CotKind::kVanilla, CotKind::kLong};
};
// Writes the record container to cfg.out, "<out>.manifest.json" and the
// config snapshot. Returns the manifest.
nlohmann::json cmd_extract(RunConfig cfg, const ExtractOptions& opts = {});

struct PatternOptions {
  int limit = 0;  // use at most this many pairs; 0 means all
};
SteeringVector cmd_pattern(RunConfig cfg, const PatternOptions& opts = {});

struct MemoryOptions {
  std::string domain;  // keep only examples of this domain; empty keeps all
};
std::size_t cmd_memory_build(RunConfig cfg, const MemoryOptions& opts = {});

struct GenerateOptions {
  std::vector<std::string> prompts;
  std::string domain;  // which configured memory to retrieve from
  bool steer = true;   // false ignores pattern and memories entirely
};
struct GenerateOutput {
  std::string prompt;
  Generation generation;
  nlohmann::json to_json() const;
};
std::vector<GenerateOutput> cmd_generate(RunConfig cfg, const GenerateOptions& opts);

struct EvalOptions {
  std::vector<std::string> methods{"zero_shot_cot", "steered"};
  std::size_t limit = 0;
  bool math_equivalence = false;
  bool verbose = false;
};
// Writes "<method>.jsonl" per method and summary.json into cfg.out.
nlohmann::json cmd_eval(RunConfig cfg, const EvalOptions& opts = {});

struct AnalyzeOptions {
  std::string projection = "pca";
  std::string reducer_command;
  double perplexity = 30.0;
  bool by_domain = false;
  std::vector<std::filesystem::path> eval_records;
};
// entropy.json, projection.csv, separation.json (and lengths.json when
// eval records are given) in cfg.out.
nlohmann::json cmd_analyze(RunConfig cfg, const AnalyzeOptions& opts = {});

struct SweepOptions {
  std::vector<double> lambdas{0.001, 0.01, 0.1, 1.0};
  std::vector<int> ks{1, 8, 64};
  std::string target = "both";  // which strength the sweep varies: p, d or both
  std::size_t limit = 0;
};
nlohmann::json cmd_sweep(RunConfig cfg, const SweepOptions& opts = {});

void cmd_plot(const std::filesystem::path& input, const std::filesystem::path& output,
              const std::string& title);

int run(int argc, char** argv);

}  // namespace longsteer::cli
