#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "longsteer/backend.hpp"

namespace longsteer {

struct MockOptions {
  std::string model_id = "mock";
  int num_layers = 4;
  int hidden_dim = 8;
  int context_length = 4096;
  // 0 means full causal mixing. w > 0 lets position t read (t - w, t] only,
  // which makes influence of position 0 provably bounded.
  int attention_window = 0;
  std::uint64_t seed = 1;

  static MockOptions from_json(const BackendSpec& spec);
};

// Deterministic toy residual network for tests.
//
// Tokens are whitespace-separated words. Ids are handed out on first sight,
// but embeddings are derived from a hash of the word itself, so hidden states
// do not depend on call order. Each block adds 0.5 * tanh(W_l * mean(window))
// to the residual. Id 0 is EOS.
class MockBackend final : public ModelBackend {
 public:
  explicit MockBackend(MockOptions options = {});

  std::string model_id() const override { return options_.model_id; }
  int num_layers() const override { return options_.num_layers; }
  int hidden_dim() const override { return options_.hidden_dim; }
  int context_length() const override { return options_.context_length; }
  std::optional<int> eos_token() const override { return 0; }

  // hidden_state(text, layer) returns `v` verbatim for this exact text.
  void program_hidden_state(const std::string& text, int layer,
                            std::vector<float> v);

  // If set, generation emits the responder's text for a prompt (matched on
  // its whitespace-normalized form) followed by EOS. Forward passes and edits
  // still run; only token selection is scripted.
  using Responder =
      std::function<std::optional<std::string>(const std::string& prompt)>;
  void set_responder(Responder responder) { responder_ = std::move(responder); }

  std::vector<float> hidden_state(std::string_view text, int layer) override;

  // Residual rows (positions x hidden_dim, row-major) leaving each layer for
  // the most recent prefill.
  const std::vector<std::vector<float>>& last_prefill_states() const {
    return last_prefill_;
  }

  int forward_calls() const { return forward_calls_; }

 protected:
  std::vector<int> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const int> ids) const override;
  void reset() override;
  std::vector<float> forward(std::span<const int> tokens,
                             const BlockHook& hook) override;
  int select_token(std::span<const float> logits, int step) override;

 private:
  std::vector<float> embedding(int id) const;

  MockOptions options_;
  std::vector<std::vector<float>> mix_;  // per layer, d x d row-major

  mutable std::mutex vocab_mutex_;
  mutable std::vector<std::string> words_;
  mutable std::unordered_map<std::string, int> ids_;

  std::map<std::pair<std::string, int>, std::vector<float>> programmed_;
  Responder responder_;
  std::optional<std::vector<int>> script_;

  // inputs_[l] holds the rows entering block l for every cached position.
  std::vector<std::vector<float>> inputs_;
  std::vector<float> final_row_;
  int cached_ = 0;
  std::vector<std::vector<float>> last_prefill_;
  int forward_calls_ = 0;
};

}  // namespace longsteer
