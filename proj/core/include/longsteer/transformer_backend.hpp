#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "longsteer/backend.hpp"
#include "longsteer/safetensors.hpp"
#include "longsteer/tokenizer.hpp"

namespace longsteer {

struct TransformerConfig {
  int hidden_size = 0;
  int intermediate_size = 0;
  int num_layers = 0;
  int num_heads = 0;
  int num_kv_heads = 0;
  int head_dim = 0;
  double rms_norm_eps = 1e-6;
  double rope_theta = 10000.0;
  int vocab_size = 0;
  int max_positions = 2048;
  bool tie_embeddings = false;
  std::optional<int> bos_token;
  std::optional<int> eos_token;
  bool add_bos = false;

  // Reads a Hugging Face config.json for LlamaForCausalLM / Qwen2ForCausalLM.
  static TransformerConfig from_json(const nlohmann::json& j);
};

// Resolves a model id to a directory: an existing path is used as is,
// otherwise $LONGSTEER_MODEL_CACHE/<id>, then ./models/<id>.
std::filesystem::path resolve_model_dir(const std::string& model_id);

// Llama-family decoder (RMSNorm, rotary positions, SwiGLU MLP, grouped-query
// attention, optional q/k/v biases as in Qwen2), float32 on CPU with a
// key/value cache. Hidden state for layer l is the residual after block l.
class TransformerBackend final : public ModelBackend {
 public:
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::VectorXf;

  TransformerBackend(std::string model_id, TransformerConfig config,
                     const TensorMap& weights, std::unique_ptr<Tokenizer> tokenizer);

  static std::unique_ptr<TransformerBackend> load(const std::filesystem::path& dir);

  std::string model_id() const override { return model_id_; }
  int num_layers() const override { return config_.num_layers; }
  int hidden_dim() const override { return config_.hidden_size; }
  int context_length() const override;
  std::optional<int> eos_token() const override { return config_.eos_token; }

  const TransformerConfig& config() const { return config_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }

 protected:
  std::vector<int> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const int> ids) const override;
  void reset() override;
  std::vector<float> forward(std::span<const int> tokens, const BlockHook& hook) override;

 private:
  struct Layer {
    Vector input_norm;
    Vector post_norm;
    Matrix wq, wk, wv, wo;
    Vector bq, bk, bv;  // empty when absent
    Matrix gate, up, down;
    Matrix cache_k, cache_v;  // rows = positions
  };

  void rms_norm(const Matrix& x, const Vector& w, Matrix& out) const;
  void rotate(Matrix& m, int heads, int first_position) const;

  std::string model_id_;
  TransformerConfig config_;
  std::unique_ptr<Tokenizer> tokenizer_;
  Matrix embed_;
  Matrix lm_head_;  // empty when tied
  Vector final_norm_;
  std::vector<Layer> layers_;
  std::vector<float> inv_freq_;
  int cached_ = 0;
  bool prepend_bos_ = false;
};

}  // namespace longsteer
