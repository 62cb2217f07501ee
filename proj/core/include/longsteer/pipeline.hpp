#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "longsteer/backend.hpp"
#include "longsteer/repr.hpp"

namespace longsteer {

// One question with its short and (optionally) long reasoning trace.
struct CoTExample {
  std::string example_id;
  std::string domain;
  std::string question;
  std::string vanilla_cot;
  std::optional<std::string> long_cot;
};

// Line-delimited JSON: example_id, domain, question, vanilla_cot, long_cot?
// Blank lines are skipped. Malformed lines raise ParseError naming the
// 1-based line number; repeated ids raise DuplicateId.
std::vector<CoTExample> parse_examples(std::istream& in);
std::vector<CoTExample> load_examples(const std::filesystem::path& path);

struct ExtractionOptions {
  // Prefix the zero-shot instruction to the question before reading states.
  bool include_instruction = false;
};

// The string whose final-token state is the representation:
//   kNone    -> question
//   kVanilla -> question + "\n" + vanilla_cot
//   kLong    -> question + "\n" + long_cot
std::string extraction_text(const CoTExample& ex, CotKind kind,
                            const ExtractionOptions& options = {});

struct ExtractionManifest {
  std::string model_id;
  int layer = 0;
  std::string input_digest;  // "sha256:<hex>" of the input file, if known
  std::map<CotKind, int> counts;
  std::string created;

  nlohmann::json to_json() const;
};

struct ExtractionResult {
  std::vector<RepresentationRecord> records;
  ExtractionManifest manifest;
};

// Records in example order, and for each example in kNone, kVanilla, kLong
// order restricted to `kinds`. Examples that overflow the context are
// rejected (ContextOverflow) rather than truncated.
ExtractionResult extract_all(std::span<const CoTExample> examples, ModelBackend& backend,
                             int layer, std::span<const CotKind> kinds,
                             const ExtractionOptions& options = {});

// Middle layer, floor(num_layers / 2).
int default_layer(int num_layers);
int default_layer(const ModelBackend& backend);

struct DatasetStats {
  std::size_t examples = 0;
  double mean_vanilla_tokens = 0.0;
  std::optional<double> mean_long_tokens;
};

// Token statistics of the traces under the backend's tokenizer.
DatasetStats dataset_stats(std::span<const CoTExample> examples, const ModelBackend& backend);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace longsteer
