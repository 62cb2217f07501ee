#include <gtest/gtest.h>

#include <filesystem>

#include "longsteer/memory.hpp"
#include "longsteer/pipeline.hpp"
#include "longsteer/transformer_backend.hpp"

namespace ls = longsteer;
namespace fs = std::filesystem;

namespace {

const fs::path kModelDir = LONGSTEER_MODEL_DIR;
const fs::path kDataDir = LONGSTEER_DATA_DIR;

class RealModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    if (fs::exists(kModelDir / "model.safetensors") && fs::exists(kDataDir / "math_cot.jsonl")) {
      backend_ = ls::TransformerBackend::load(kModelDir).release();
      backend_->settings().max_new_tokens = 600;
      examples_ = new std::vector<ls::CoTExample>(ls::load_examples(kDataDir / "math_cot.jsonl"));
    }
  }
  static void TearDownTestSuite() {
    delete backend_;
    delete examples_;
    backend_ = nullptr;
    examples_ = nullptr;
  }
  void SetUp() override {
    if (backend_ == nullptr) GTEST_SKIP() << "no checkpoint at " << kModelDir;
  }

  static ls::TransformerBackend* backend_;
  static std::vector<ls::CoTExample>* examples_;
};

ls::TransformerBackend* RealModel::backend_ = nullptr;
std::vector<ls::CoTExample>* RealModel::examples_ = nullptr;

}  // namespace

TEST_F(RealModel, EncodeDecodeRoundTrips) {
  int checked = 0;
  for (const auto& ex : *examples_) {
    for (const auto& text : {ex.question, ex.vanilla_cot, ex.long_cot.value_or("x")}) {
      EXPECT_EQ(backend_->decode(backend_->encode(text)), text);
      ++checked;
    }
  }
  EXPECT_GE(checked, 300);
}

TEST_F(RealModel, TraceChangesTheRepresentation) {
  const int layer = ls::default_layer(*backend_);
  EXPECT_EQ(layer, 3);
  int differ = 0;
  for (const auto& ex : *examples_) {
    const auto q = backend_->hidden_state(ls::extraction_text(ex, ls::CotKind::kNone), layer);
    const auto v = backend_->hidden_state(ls::extraction_text(ex, ls::CotKind::kVanilla), layer);
    ASSERT_EQ(q.size(), 128u);
    if (q != v) ++differ;
  }
  EXPECT_GE(differ, 95);
}

TEST_F(RealModel, HiddenStatesAreDeterministic) {
  const auto& text = examples_->front().question;
  const auto all = backend_->hidden_states(text);
  ASSERT_EQ(all.size(), 6u);
  for (int l = 0; l < 6; ++l) EXPECT_EQ(backend_->hidden_state(text, l), all[static_cast<std::size_t>(l)]);
}

TEST_F(RealModel, MemoryOverTheFullExampleSet) {
  const auto mem = ls::memory_build(*examples_, *backend_, 3);
  EXPECT_EQ(mem.size(), examples_->size());
  EXPECT_EQ(mem.dim(), 128);
  // A stored question retrieves itself first.
  const auto nn = ls::top_k(mem, mem.entries()[17].key, 8);
  EXPECT_EQ(nn[0].index, 17u);
  EXPECT_NEAR(nn[0].similarity, 1.0, 1e-6);
}

TEST_F(RealModel, GreedyGenerationIsRepeatableAndStops) {
  const std::string prompt = "What is 12 times 3?\nAnswer the following question step by step and put the final answer in \\boxed{}.";
  const auto a = backend_->generate(prompt);
  const auto b = backend_->generate(prompt);
  EXPECT_EQ(a.token_ids, b.token_ids);
  EXPECT_GT(a.num_tokens, 0);
  EXPECT_TRUE(a.stopped_at_eos) << a.text;
}
