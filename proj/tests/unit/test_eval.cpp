#include <gtest/gtest.h>

#include <sstream>

#include "longsteer/error.hpp"
#include "longsteer/eval.hpp"
#include "longsteer/log.hpp"
#include "longsteer/mock_backend.hpp"
#include "test_util.hpp"

namespace ls = longsteer;
using test_util::error_code;

namespace {

ls::BenchmarkItem math_item(std::string id, std::string prompt, std::string gold) {
  return {std::move(id), "math", std::move(prompt), ls::AnswerType::kBoxedExpression, std::move(gold), {}};
}

ls::BenchmarkItem mc_item() {
  return {"mc1", "physics", "Which is a vector?", ls::AnswerType::kMultipleChoice, "C",
          {"mass", "time", "velocity", "energy"}};
}

}  // namespace

TEST(Render, MathAndChoicePrompts) {
  const auto m = math_item("m1", "What is 2+2?", "4");
  EXPECT_EQ(ls::render_prompt(m),
            "What is 2+2?\nAnswer the following question step by step and put the final answer in "
            "\\boxed{}.");
  EXPECT_EQ(ls::render_prompt(mc_item()),
            "Which is a vector?\nA) mass\nB) time\nC) velocity\nD) energy\nAnswer the following "
            "question step by step and put the final answer in \\boxed{}. Put the letter of the "
            "correct choice in the box.");
}

TEST(Render, SteeringNeverChangesThePrompt) {
  for (const auto& item : {math_item("m", "q", "1"), mc_item()}) {
    EXPECT_EQ(ls::render_prompt(item, ls::PromptMode::kZeroShotCot),
              ls::render_prompt(item, ls::PromptMode::kSteered));
  }
}

TEST(Extract, BoxedTakesLastBalanced) {
  EXPECT_EQ(ls::extract_boxed("so \\boxed{1} then \\boxed{\\frac{1}{2}}"), "\\frac{1}{2}");
  EXPECT_EQ(ls::extract_boxed("\\boxed{3} and \\boxed{unclosed"), "3");
  EXPECT_FALSE(ls::extract_boxed("no box here").has_value());
  EXPECT_EQ(ls::extract_boxed("\\boxed{}"), "");
}

TEST(Extract, MultipleChoice) {
  EXPECT_EQ(ls::extract_answer("I pick \\boxed{C}", ls::AnswerType::kMultipleChoice), "C");
  EXPECT_EQ(ls::extract_answer("\\boxed{\\text{ b }}", ls::AnswerType::kMultipleChoice), "B");
  EXPECT_EQ(ls::extract_answer("A is wrong, so the answer is D.", ls::AnswerType::kMultipleChoice), "D");
  EXPECT_EQ(ls::extract_answer("the answer is E", ls::AnswerType::kMultipleChoice, 4), std::nullopt);
  EXPECT_EQ(ls::extract_answer("Because B. Also \\boxed{velocity}", ls::AnswerType::kMultipleChoice), "B");
  EXPECT_EQ(ls::extract_answer("BAD answer", ls::AnswerType::kMultipleChoice), std::nullopt);
}

TEST(Score, ExactAndEquivalence) {
  EXPECT_TRUE(ls::score("4", "4", ls::AnswerType::kBoxedExpression));
  EXPECT_TRUE(ls::score(" 4 ", "4", ls::AnswerType::kBoxedExpression));
  EXPECT_FALSE(ls::score("4.0", "4", ls::AnswerType::kBoxedExpression));
  EXPECT_FALSE(ls::score(std::nullopt, "4", ls::AnswerType::kBoxedExpression));
  EXPECT_TRUE(ls::score("c", "C", ls::AnswerType::kMultipleChoice));
  EXPECT_FALSE(ls::score("B", "C", ls::AnswerType::kMultipleChoice));

  const ls::EquivalenceHook eq = ls::basic_math_equivalence;
  EXPECT_TRUE(ls::score("4.0", "4", ls::AnswerType::kBoxedExpression, eq));
  EXPECT_TRUE(ls::score("\\frac{1}{2}", "0.5", ls::AnswerType::kBoxedExpression, eq));
  EXPECT_TRUE(ls::score("\\dfrac{3}{4}", "3/4", ls::AnswerType::kBoxedExpression, eq));
  EXPECT_TRUE(ls::score("1,000", "1000", ls::AnswerType::kBoxedExpression, eq));
  EXPECT_TRUE(ls::score("$12$", "12", ls::AnswerType::kBoxedExpression, eq));
  EXPECT_TRUE(ls::score("-\\frac{1}{4}", "-0.25", ls::AnswerType::kBoxedExpression, eq));
  EXPECT_FALSE(ls::score("x+1", "1+x", ls::AnswerType::kBoxedExpression, eq));
  EXPECT_FALSE(ls::score("1/0", "1", ls::AnswerType::kBoxedExpression, eq));
}

TEST(Items, ParseAndValidate) {
  std::istringstream in(
      R"({"item_id": "m1", "domain": "math", "prompt": "q", "answer_type": "boxed", "gold": "4"})"
      "\n"
      R"({"item_id": "c1", "domain": "physics", "prompt": "q", "answer_type": "multiple_choice", "gold": "B", "choices": ["x", "y"]})"
      "\n");
  const auto items = ls::parse_items(in);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[1].answer_type, ls::AnswerType::kMultipleChoice);
  EXPECT_EQ(items[1].choices.size(), 2u);

  auto bad = mc_item();
  bad.gold = "E";
  EXPECT_EQ(error_code([&] { bad.validate(); }), ls::Errc::kInvalidInput);
  bad = mc_item();
  bad.choices.resize(1);
  EXPECT_EQ(error_code([&] { bad.validate(); }), ls::Errc::kInvalidInput);
  std::istringstream dup(
      R"({"item_id": "m1", "prompt": "q", "answer_type": "boxed", "gold": "4"})"
      "\n"
      R"({"item_id": "m1", "prompt": "q", "answer_type": "boxed", "gold": "4"})");
  EXPECT_EQ(error_code([&] { ls::parse_items(dup); }), ls::Errc::kDuplicateId);
  std::istringstream type(R"({"item_id": "m1", "prompt": "q", "answer_type": "essay", "gold": "4"})");
  EXPECT_EQ(error_code([&] { ls::parse_items(type); }), ls::Errc::kParseError);
}

TEST(RunEval, ScriptedClosedLoop) {
  ls::MockBackend backend;
  backend.set_responder([](const std::string& prompt) -> std::optional<std::string> {
    if (prompt.find("two plus two") != std::string::npos) return "so \\boxed{4} .";
    if (prompt.find("vector") != std::string::npos) return "velocity has direction \\boxed{C}";
    return "no idea";
  });
  const std::vector<ls::BenchmarkItem> items{math_item("a", "what is two plus two", "4"),
                                             math_item("b", "what is three plus three", "6"),
                                             mc_item()};
  std::vector<std::size_t> seen;
  ls::EvalConfig cfg;
  const auto res = ls::run_eval(items, backend, cfg, {},
                                [&](const ls::EvalRecord&, std::size_t i, std::size_t total) {
                                  EXPECT_EQ(total, 3u);
                                  seen.push_back(i);
                                });
  ASSERT_EQ(res.records.size(), 3u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(res.records[0].correct);
  EXPECT_EQ(res.records[0].extracted, "4");
  EXPECT_EQ(res.records[0].output_tokens, 3);
  EXPECT_FALSE(res.records[1].correct);
  EXPECT_FALSE(res.records[1].extracted.has_value());
  EXPECT_TRUE(res.records[2].correct);
  EXPECT_EQ(res.summary.n, 3u);
  EXPECT_NEAR(*res.summary.accuracy, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(res.summary.method, "zero_shot_cot");

  const auto j = res.records[1].to_json();
  EXPECT_TRUE(j.at("extracted").is_null());
}

TEST(RunEval, SteeredUsesMemoryForMatchingDomain) {
  ls::MockBackend backend;
  const std::vector<ls::BenchmarkItem> items{math_item("a", "what is two plus two", "4"), mc_item()};
  ls::EvalConfig cfg;
  cfg.method = "steered";
  cfg.mode = ls::PromptMode::kSteered;
  cfg.injection.layer = 1;
  cfg.injection.k = 4;

  EXPECT_EQ(error_code([&] { ls::run_eval(items, backend, cfg); }), ls::Errc::kConfigError);

  ls::SteeringArtifacts art;
  art.pattern = ls::SteeringVector{ls::VectorKind::kPattern, 1, std::vector<float>(8, 0.25f), 3};
  ls::DomainMemory mem("mock", 1, 8);
  mem.add({std::vector<float>(8, 1.f), std::vector<float>(8, -1.f), "x", "math"});
  art.memories.emplace("math", mem);

  ls::WarningCapture warnings;
  const auto res = ls::run_eval(items, backend, cfg, art);
  EXPECT_EQ(res.records.size(), 2u);
  EXPECT_TRUE(warnings.contains("no domain memory for 'physics'"));
  EXPECT_TRUE(warnings.contains("exceeds memory size"));

  art.pattern->layer = 2;
  EXPECT_EQ(error_code([&] { ls::run_eval(items, backend, cfg, art); }), ls::Errc::kLayerMismatch);
  art.pattern->layer = 1;
  art.pattern->vector.resize(3);
  EXPECT_EQ(error_code([&] { ls::run_eval(items, backend, cfg, art); }), ls::Errc::kDimensionError);
}

TEST(RunEval, ZeroStrengthMatchesBaseline) {
  ls::MockBackend backend;
  const std::vector<ls::BenchmarkItem> items{math_item("a", "alpha beta gamma", "1"),
                                             math_item("b", "delta epsilon", "2")};
  ls::EvalConfig base;
  base.mode = ls::PromptMode::kZeroShotCot;
  backend.settings().max_new_tokens = 12;
  const auto r0 = ls::run_eval(items, backend, base);

  ls::EvalConfig steer;
  steer.mode = ls::PromptMode::kSteered;
  steer.injection.layer = 2;
  steer.injection.lambda_p = 0.0;
  steer.injection.lambda_d = 0.0;
  ls::SteeringArtifacts art;
  art.pattern = ls::SteeringVector{ls::VectorKind::kPattern, 2, std::vector<float>(8, 3.f), 1};
  const auto r1 = ls::run_eval(items, backend, steer, art);
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(r0.records[i].generated, r1.records[i].generated);
    EXPECT_EQ(r0.records[i].output_tokens, r1.records[i].output_tokens);
  }
}

TEST(Summary, EmptyRunReportsNulls) {
  const auto s = ls::summarize("steered", {});
  EXPECT_EQ(s.n, 0u);
  EXPECT_FALSE(s.accuracy.has_value());
  const auto j = s.to_json();
  EXPECT_TRUE(j.at("accuracy").is_null());
  EXPECT_TRUE(j.at("mean_output_tokens").is_null());
  ls::MockBackend backend;
  EXPECT_EQ(ls::run_eval({}, backend, {}).summary.n, 0u);
}
