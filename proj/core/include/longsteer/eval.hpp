#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "longsteer/backend.hpp"
#include "longsteer/memory.hpp"
#include "longsteer/repr.hpp"

namespace longsteer {

inline constexpr std::string_view kZeroShotInstruction =
    "Answer the following question step by step and put the final answer in \\boxed{}.";
inline constexpr std::string_view kChoiceSuffix = " Put the letter of the correct choice in the box.";

enum class AnswerType : std::uint8_t { kBoxedExpression, kMultipleChoice };
enum class PromptMode : std::uint8_t { kZeroShotCot, kSteered };

std::string_view to_string(AnswerType t);
AnswerType parse_answer_type(std::string_view s);

struct BenchmarkItem {
  std::string item_id;
  std::string domain;
  std::string prompt;
  AnswerType answer_type = AnswerType::kBoxedExpression;
  std::string gold;
  std::vector<std::string> choices;

  void validate() const;
};

// Line-delimited JSON: item_id, domain, prompt, answer_type ("boxed" or
// "multiple_choice"), gold, choices.
std::vector<BenchmarkItem> parse_items(std::istream& in);
std::vector<BenchmarkItem> load_items(const std::filesystem::path& path);

// The mode is accepted for symmetry only: steering never changes the text.
std::string render_prompt(const BenchmarkItem& item, PromptMode mode = PromptMode::kZeroShotCot);

// Content of the last balanced \boxed{...}; for multiple choice, the last
// standalone letter among the item's options (A.. up to num_choices).
std::optional<std::string> extract_boxed(std::string_view text);
std::optional<std::string> extract_answer(std::string_view text, AnswerType type,
                                          int num_choices = 4);

using EquivalenceHook = std::function<bool(std::string_view extracted, std::string_view gold)>;

bool score(const std::optional<std::string>& extracted, std::string_view gold, AnswerType type,
           const EquivalenceHook& equivalent = {});

// Opt-in equivalence for simple numeric forms: \frac{a}{b}, \dfrac, a/b,
// decimals, thousands separators, trailing ".0" and surrounding $...$.
bool basic_math_equivalence(std::string_view a, std::string_view b);

struct EvalRecord {
  std::string item_id;
  std::string method;
  std::string generated;
  std::optional<std::string> extracted;
  bool correct = false;
  int output_tokens = 0;
  double wall_time = 0.0;

  nlohmann::json to_json() const;
};

struct EvalSummary {
  std::string method;
  std::size_t n = 0;
  std::optional<double> accuracy;
  std::optional<double> mean_output_tokens;

  nlohmann::json to_json() const;
};

// Inputs for the steered method. Memories are keyed by domain; items whose
// domain has no memory are steered by the pattern vector alone.
struct SteeringArtifacts {
  std::optional<SteeringVector> pattern;
  std::map<std::string, DomainMemory> memories;
};

struct EvalConfig {
  std::string method = "zero_shot_cot";
  PromptMode mode = PromptMode::kZeroShotCot;
  InjectionConfig injection;
  EquivalenceHook equivalence;
};

struct EvalResult {
  std::vector<EvalRecord> records;
  EvalSummary summary;
};

// Called after each item, e.g. to stream records to disk.
using EvalProgress = std::function<void(const EvalRecord&, std::size_t index, std::size_t total)>;

EvalResult run_eval(std::span<const BenchmarkItem> items, ModelBackend& backend,
                    const EvalConfig& config, const SteeringArtifacts& artifacts = {},
                    const EvalProgress& progress = {});

EvalSummary summarize(std::string method, std::span<const EvalRecord> records);

}  // namespace longsteer
