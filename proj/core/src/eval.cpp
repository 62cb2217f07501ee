#include "longsteer/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "longsteer/error.hpp"
#include "longsteer/log.hpp"

namespace longsteer {

std::string_view to_string(AnswerType t) {
  return t == AnswerType::kMultipleChoice ? "multiple_choice" : "boxed";
}

AnswerType parse_answer_type(std::string_view s) {
  if (s == "boxed" || s == "boxed_expression" || s == "BOXED_EXPRESSION") {
    return AnswerType::kBoxedExpression;
  }
  if (s == "multiple_choice" || s == "mc" || s == "MULTIPLE_CHOICE") {
    return AnswerType::kMultipleChoice;
  }
  throw Error(Errc::kParseError, "unknown answer_type '" + std::string(s) + "'");
}

void BenchmarkItem::validate() const {
  if (item_id.empty()) throw Error(Errc::kMissingField, "item without item_id");
  if (gold.empty()) throw Error(Errc::kMissingField, item_id + ": empty gold answer");
  if (answer_type == AnswerType::kMultipleChoice) {
    if (choices.size() < 2 || choices.size() > 26) {
      throw Error(Errc::kInvalidInput, item_id + ": multiple choice needs 2 to 26 choices");
    }
    if (gold.size() != 1 || std::toupper(static_cast<unsigned char>(gold[0])) < 'A' ||
        std::toupper(static_cast<unsigned char>(gold[0])) >= 'A' + static_cast<int>(choices.size())) {
      throw Error(Errc::kInvalidInput, item_id + ": gold '" + gold + "' is not a choice letter");
    }
  }
}

std::vector<BenchmarkItem> parse_items(std::istream& in) {
  std::vector<BenchmarkItem> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(Errc::kParseError, where + "malformed JSON");
    BenchmarkItem item;
    try {
      item.item_id = j.at("item_id").get<std::string>();
      item.domain = j.value("domain", "");
      item.prompt = j.at("prompt").get<std::string>();
      item.answer_type = parse_answer_type(j.value("answer_type", "boxed"));
      item.gold = j.at("gold").get<std::string>();
      if (j.contains("choices") && !j["choices"].is_null()) {
        item.choices = j["choices"].get<std::vector<std::string>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParseError, where + e.what());
    }
    try {
      item.validate();
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
    if (!seen.insert(item.item_id).second) {
      throw Error(Errc::kDuplicateId, where + "duplicate item_id " + item.item_id);
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<BenchmarkItem> load_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  try {
    return parse_items(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string render_prompt(const BenchmarkItem& item, PromptMode /*mode*/) {
  std::string out = item.prompt;
  if (item.answer_type == AnswerType::kMultipleChoice) {
    for (std::size_t i = 0; i < item.choices.size(); ++i) {
      out += '\n';
      out += static_cast<char>('A' + i);
      out += ") ";
      out += item.choices[i];
    }
  }
  out += '\n';
  out += kZeroShotInstruction;
  if (item.answer_type == AnswerType::kMultipleChoice) out += kChoiceSuffix;
  return out;
}

std::optional<std::string> extract_boxed(std::string_view text) {
  static constexpr std::string_view kTag = "\\boxed{";
  std::optional<std::string> last;
  std::size_t pos = 0;
  while ((pos = text.find(kTag, pos)) != std::string_view::npos) {
    const std::size_t start = pos + kTag.size();
    int depth = 1;
    std::size_t i = start;
    for (; i < text.size() && depth > 0; ++i) {
      if (text[i] == '{') ++depth;
      else if (text[i] == '}') --depth;
    }
    if (depth == 0) last = std::string(text.substr(start, i - 1 - start));
    pos = start;
  }
  return last;
}

namespace {

bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::optional<std::string> extract_letter(std::string_view text, int num_choices) {
  const char hi = static_cast<char>('A' + std::clamp(num_choices, 1, 26) - 1);
  for (std::size_t i = text.size(); i-- > 0;) {
    const char c = text[i];
    if (c < 'A' || c > hi) continue;
    const bool left_ok = i == 0 || !is_word(text[i - 1]);
    const bool right_ok = i + 1 == text.size() || !is_word(text[i + 1]);
    if (left_ok && right_ok) return std::string(1, c);
  }
  return std::nullopt;
}

std::string normalize_ws(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

}  // namespace

std::optional<std::string> extract_answer(std::string_view text, AnswerType type, int num_choices) {
  if (type == AnswerType::kBoxedExpression) return extract_boxed(text);
  // Prefer a letter inside the final box; fall back to the last bare letter.
  if (auto boxed = extract_boxed(text)) {
    std::string inner = normalize_ws(*boxed);
    if (inner.size() >= 2 && inner.rfind("\\text{", 0) == 0 && inner.back() == '}') {
      inner = inner.substr(6, inner.size() - 7);
    }
    if (inner.size() == 1) {
      const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(inner[0])));
      if (c >= 'A' && c < 'A' + num_choices) return std::string(1, c);
    }
  }
  return extract_letter(text, num_choices);
}

bool score(const std::optional<std::string>& extracted, std::string_view gold, AnswerType type,
           const EquivalenceHook& equivalent) {
  if (!extracted || extracted->empty()) return false;
  if (type == AnswerType::kMultipleChoice) {
    const auto a = normalize_ws(*extracted);
    const auto b = normalize_ws(gold);
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::toupper(static_cast<unsigned char>(x)) ==
                    std::toupper(static_cast<unsigned char>(y));
           });
  }
  if (normalize_ws(*extracted) == normalize_ws(gold)) return true;
  return equivalent && equivalent(*extracted, gold);
}

namespace {

// Parses a plain decimal or integer, allowing thousands commas.
std::optional<double> parse_number(std::string s) {
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<std::pair<std::string, std::string>> split_frac(const std::string& s) {
  for (std::string_view tag : {"\\frac{", "\\dfrac{", "\\tfrac{"}) {
    if (s.rfind(tag, 0) != 0) continue;
    std::size_t i = tag.size();
    int depth = 1;
    const std::size_t num_start = i;
    for (; i < s.size() && depth > 0; ++i) {
      if (s[i] == '{') ++depth;
      else if (s[i] == '}') --depth;
    }
    if (depth != 0 || i >= s.size() || s[i] != '{') return std::nullopt;
    const std::string num = s.substr(num_start, i - 1 - num_start);
    const std::size_t den_start = i + 1;
    depth = 1;
    for (i = den_start; i < s.size() && depth > 0; ++i) {
      if (s[i] == '{') ++depth;
      else if (s[i] == '}') --depth;
    }
    if (depth != 0 || i != s.size()) return std::nullopt;
    return std::pair{num, s.substr(den_start, i - 1 - den_start)};
  }
  return std::nullopt;
}

std::optional<double> numeric_value(std::string_view raw) {
  std::string s = normalize_ws(raw);
  while (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = s.substr(1, s.size() - 2);
  bool neg = false;
  if (s.rfind("-\\", 0) == 0) {
    neg = true;
    s.erase(0, 1);
  }
  if (auto f = split_frac(s)) {
    auto n = numeric_value(f->first);
    auto d = numeric_value(f->second);
    if (!n || !d || *d == 0.0) return std::nullopt;
    return (neg ? -1.0 : 1.0) * *n / *d;
  }
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    auto n = parse_number(s.substr(0, slash));
    auto d = parse_number(s.substr(slash + 1));
    if (!n || !d || *d == 0.0) return std::nullopt;
    return *n / *d;
  }
  return parse_number(s);
}

}  // namespace

bool basic_math_equivalence(std::string_view a, std::string_view b) {
  const auto x = numeric_value(a);
  const auto y = numeric_value(b);
  if (!x || !y) return false;
  return std::fabs(*x - *y) <= 1e-9 * std::max({1.0, std::fabs(*x), std::fabs(*y)});
}

nlohmann::json EvalRecord::to_json() const {
  return {{"item_id", item_id},
          {"method", method},
          {"generated", generated},
          {"extracted", extracted ? nlohmann::json(*extracted) : nlohmann::json(nullptr)},
          {"correct", correct},
          {"output_tokens", output_tokens},
          {"wall_time", wall_time}};
}

nlohmann::json EvalSummary::to_json() const {
  return {{"method", method},
          {"n", n},
          {"accuracy", accuracy ? nlohmann::json(*accuracy) : nlohmann::json(nullptr)},
          {"mean_output_tokens",
           mean_output_tokens ? nlohmann::json(*mean_output_tokens) : nlohmann::json(nullptr)}};
}

EvalSummary summarize(std::string method, std::span<const EvalRecord> records) {
  EvalSummary s;
  s.method = std::move(method);
  s.n = records.size();
  if (records.empty()) return s;
  double correct = 0.0, tokens = 0.0;
  for (const auto& r : records) {
    correct += r.correct ? 1.0 : 0.0;
    tokens += r.output_tokens;
  }
  s.accuracy = correct / static_cast<double>(records.size());
  s.mean_output_tokens = tokens / static_cast<double>(records.size());
  return s;
}

EvalResult run_eval(std::span<const BenchmarkItem> items, ModelBackend& backend,
                    const EvalConfig& config, const SteeringArtifacts& artifacts,
                    const EvalProgress& progress) {
  const bool steered = config.mode == PromptMode::kSteered;
  if (steered) {
    if (!artifacts.pattern) throw Error(Errc::kConfigError, "steered evaluation needs a pattern vector");
    config.injection.validate();
    backend.validate_edit({config.injection.layer, EditPosition::kFirstToken,
                           artifacts.pattern->vector, 0.0f, EditPhase::kPrefillOnly});
  }

  EvalResult out;
  out.records.reserve(items.size());
  std::set<std::string> fallback_logged;
  for (std::size_t idx = 0; idx < items.size(); ++idx) {
    const auto& item = items[idx];
    const auto prompt = render_prompt(item, config.mode);
    const auto t0 = std::chrono::steady_clock::now();

    Generation gen;
    if (steered) {
      std::optional<SteeringVector> domain;
      const auto mem = artifacts.memories.find(item.domain);
      if (mem != artifacts.memories.end() && !mem->second.empty()) {
        const auto query = backend.hidden_state(item.prompt, mem->second.layer());
        domain = retrieve_domain_vector(mem->second, query, config.injection.k);
      } else if (!artifacts.memories.empty() && fallback_logged.insert(item.domain).second) {
        warn("no domain memory for '" + item.domain + "', steering with the pattern vector only");
      }
      const auto edits =
          build_edits(*artifacts.pattern, domain ? &*domain : nullptr, config.injection);
      gen = backend.generate_with_edits(prompt, edits);
    } else {
      gen = backend.generate(prompt);
    }

    EvalRecord rec;
    rec.item_id = item.item_id;
    rec.method = config.method;
    rec.generated = gen.text;
    rec.extracted =
        extract_answer(gen.text, item.answer_type, static_cast<int>(item.choices.size()));
    rec.correct = score(rec.extracted, item.gold, item.answer_type, config.equivalence);
    rec.output_tokens = gen.num_tokens;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress) progress(rec, idx, items.size());
    out.records.push_back(std::move(rec));
  }
  out.summary = summarize(config.method, out.records);
  return out;
}

}  // namespace longsteer
