#include "longsteer/transformer_backend.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "longsteer/error.hpp"
#include "longsteer/log.hpp"

namespace longsteer {

namespace {

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::kIoError, "cannot open " + p.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kParseError, p.string() + " is not valid JSON");
  return j;
}

std::optional<int> token_id(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  const auto& v = j[key];
  if (v.is_array()) return v.empty() ? std::nullopt : std::optional<int>(v[0].get<int>());
  return v.get<int>();
}

const Tensor& need(const TensorMap& w, const std::string& name) {
  auto it = w.find(name);
  if (it == w.end()) throw Error(Errc::kConfigError, "checkpoint lacks tensor " + name);
  return it->second;
}

TransformerBackend::Matrix to_matrix(const Tensor& t, std::int64_t rows, std::int64_t cols,
                                     const std::string& name) {
  if (t.shape.size() != 2 || t.shape[0] != rows || t.shape[1] != cols) {
    throw Error(Errc::kConfigError, name + " has an unexpected shape");
  }
  return Eigen::Map<const TransformerBackend::Matrix>(t.data.data(), rows, cols);
}

TransformerBackend::Vector to_vector(const Tensor& t, std::int64_t n, const std::string& name) {
  if (t.numel() != n) throw Error(Errc::kConfigError, name + " has an unexpected size");
  return Eigen::Map<const Eigen::VectorXf>(t.data.data(), n);
}

}  // namespace

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
  TransformerConfig c;
  if (j.contains("architectures")) {
    const auto arch = j["architectures"].at(0).get<std::string>();
    if (arch != "LlamaForCausalLM" && arch != "Qwen2ForCausalLM" &&
        arch != "MistralForCausalLM") {
      warn("architecture " + arch + " is not a known Llama-family decoder; loading anyway");
    }
  }
  c.hidden_size = j.at("hidden_size").get<int>();
  c.intermediate_size = j.at("intermediate_size").get<int>();
  c.num_layers = j.at("num_hidden_layers").get<int>();
  c.num_heads = j.at("num_attention_heads").get<int>();
  c.num_kv_heads = j.value("num_key_value_heads", c.num_heads);
  c.head_dim = j.value("head_dim", c.hidden_size / c.num_heads);
  c.rms_norm_eps = j.value("rms_norm_eps", 1e-6);
  c.rope_theta = j.value("rope_theta", 10000.0);
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_positions = j.value("max_position_embeddings", 2048);
  c.tie_embeddings = j.value("tie_word_embeddings", false);
  c.bos_token = token_id(j, "bos_token_id");
  c.eos_token = token_id(j, "eos_token_id");
  if (j.contains("rope_scaling") && !j["rope_scaling"].is_null()) {
    warn("rope_scaling is ignored; long-context positions may drift");
  }
  if (c.num_layers < 1 || c.hidden_size < 1 || c.num_heads < 1 ||
      c.num_kv_heads < 1 || c.num_heads % c.num_kv_heads != 0 || c.head_dim % 2 != 0) {
    throw Error(Errc::kConfigError, "inconsistent transformer config");
  }
  return c;
}

std::filesystem::path resolve_model_dir(const std::string& model_id) {
  namespace fs = std::filesystem;
  if (model_id.empty()) throw Error(Errc::kConfigError, "empty model id");
  std::vector<fs::path> tried;
  const fs::path direct(model_id);
  if (fs::is_directory(direct)) return direct;
  tried.push_back(direct);
  if (const char* cache = std::getenv("LONGSTEER_MODEL_CACHE"); cache && *cache) {
    const auto p = fs::path(cache) / model_id;
    if (fs::is_directory(p)) return p;
    tried.push_back(p);
  }
  const auto local = fs::path("models") / model_id;
  if (fs::is_directory(local)) return local;
  tried.push_back(local);
  std::string msg = "model '" + model_id + "' not found; tried";
  for (const auto& p : tried) msg += " " + p.string();
  throw Error(Errc::kConfigError, msg);
}

TransformerBackend::TransformerBackend(std::string model_id, TransformerConfig config,
                                       const TensorMap& w,
                                       std::unique_ptr<Tokenizer> tokenizer)
    : model_id_(std::move(model_id)), config_(config), tokenizer_(std::move(tokenizer)) {
  const int d = config_.hidden_size;
  const int q_dim = config_.num_heads * config_.head_dim;
  const int kv_dim = config_.num_kv_heads * config_.head_dim;
  const int f = config_.intermediate_size;
  const int v = config_.vocab_size;

  embed_ = to_matrix(need(w, "model.embed_tokens.weight"), v, d, "model.embed_tokens.weight");
  if (!config_.tie_embeddings) {
    if (w.count("lm_head.weight")) {
      lm_head_ = to_matrix(w.at("lm_head.weight"), v, d, "lm_head.weight");
    } else {
      warn("lm_head.weight missing; tying output projection to the embeddings");
    }
  }
  final_norm_ = to_vector(need(w, "model.norm.weight"), d, "model.norm.weight");

  layers_.resize(static_cast<std::size_t>(config_.num_layers));
  for (int l = 0; l < config_.num_layers; ++l) {
    auto& L = layers_[static_cast<std::size_t>(l)];
    const std::string p = "model.layers." + std::to_string(l) + ".";
    auto mat = [&](const std::string& n, int rows, int cols) {
      return to_matrix(need(w, p + n), rows, cols, p + n);
    };
    auto vec = [&](const std::string& n, int size) {
      return to_vector(need(w, p + n), size, p + n);
    };
    L.input_norm = vec("input_layernorm.weight", d);
    L.post_norm = vec("post_attention_layernorm.weight", d);
    L.wq = mat("self_attn.q_proj.weight", q_dim, d);
    L.wk = mat("self_attn.k_proj.weight", kv_dim, d);
    L.wv = mat("self_attn.v_proj.weight", kv_dim, d);
    L.wo = mat("self_attn.o_proj.weight", d, q_dim);
    if (w.count(p + "self_attn.q_proj.bias")) {
      L.bq = vec("self_attn.q_proj.bias", q_dim);
      L.bk = vec("self_attn.k_proj.bias", kv_dim);
      L.bv = vec("self_attn.v_proj.bias", kv_dim);
    }
    L.gate = mat("mlp.gate_proj.weight", f, d);
    L.up = mat("mlp.up_proj.weight", f, d);
    L.down = mat("mlp.down_proj.weight", d, f);
  }

  const int half = config_.head_dim / 2;
  inv_freq_.resize(static_cast<std::size_t>(half));
  for (int j = 0; j < half; ++j) {
    inv_freq_[static_cast<std::size_t>(j)] = static_cast<float>(
        1.0 / std::pow(config_.rope_theta, (2.0 * j) / config_.head_dim));
  }
  prepend_bos_ = config_.add_bos && config_.bos_token.has_value();
}

std::unique_ptr<TransformerBackend> TransformerBackend::load(
    const std::filesystem::path& dir) {
  auto config = TransformerConfig::from_json(read_json(dir / "config.json"));
  const auto tok_cfg_path = dir / "tokenizer_config.json";
  if (std::filesystem::exists(tok_cfg_path)) {
    const auto tc = read_json(tok_cfg_path);
    config.add_bos = tc.value("add_bos_token", false);
  }
  auto tokenizer = load_tokenizer(dir, config.vocab_size);
  const auto weights = read_checkpoint(dir);
  auto name = std::filesystem::absolute(dir).lexically_normal();
  if (!name.has_filename()) name = name.parent_path();
  return std::make_unique<TransformerBackend>(name.filename().string(), config, weights,
                                              std::move(tokenizer));
}

int TransformerBackend::context_length() const { return config_.max_positions; }

std::vector<int> TransformerBackend::tokenize(std::string_view text) const {
  auto ids = tokenizer_->encode(text);
  if (prepend_bos_) ids.insert(ids.begin(), *config_.bos_token);
  return ids;
}

std::string TransformerBackend::detokenize(std::span<const int> ids) const {
  return tokenizer_->decode(ids);
}

void TransformerBackend::reset() { cached_ = 0; }

void TransformerBackend::rms_norm(const Matrix& x, const Vector& w, Matrix& out) const {
  out.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double ms = static_cast<double>(x.row(i).squaredNorm()) / static_cast<double>(x.cols());
    const float inv = static_cast<float>(1.0 / std::sqrt(ms + config_.rms_norm_eps));
    out.row(i) = (x.row(i) * inv).cwiseProduct(w.transpose());
  }
}

void TransformerBackend::rotate(Matrix& m, int heads, int first_position) const {
  const int hd = config_.head_dim;
  const int half = hd / 2;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const float pos = static_cast<float>(first_position + i);
    for (int j = 0; j < half; ++j) {
      const float angle = pos * inv_freq_[static_cast<std::size_t>(j)];
      const float c = static_cast<float>(std::cos(static_cast<double>(angle)));
      const float s = static_cast<float>(std::sin(static_cast<double>(angle)));
      for (int h = 0; h < heads; ++h) {
        float& x1 = m(i, h * hd + j);
        float& x2 = m(i, h * hd + j + half);
        const float a = x1;
        const float b = x2;
        x1 = a * c - b * s;
        x2 = b * c + a * s;
      }
    }
  }
}

std::vector<float> TransformerBackend::forward(std::span<const int> tokens,
                                               const BlockHook& hook) {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  if (n == 0) throw Error(Errc::kInvalidInput, "forward on zero tokens");
  const int p0 = cached_;
  if (p0 + n > context_length()) {
    throw Error(Errc::kContextOverflow, "sequence exceeds the context length");
  }
  const int d = config_.hidden_size;
  const int hd = config_.head_dim;
  const int nh = config_.num_heads;
  const int nkv = config_.num_kv_heads;
  const int group = nh / nkv;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  const Eigen::Index total = p0 + n;

  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = tokens[static_cast<std::size_t>(i)];
    if (t < 0 || t >= config_.vocab_size) {
      throw Error(Errc::kInvalidInput, "token id " + std::to_string(t) + " out of range");
    }
    x.row(i) = embed_.row(t);
  }

  Matrix y, q, k, v, attn(n, nh * hd), scores;
  for (int l = 0; l < config_.num_layers; ++l) {
    auto& L = layers_[static_cast<std::size_t>(l)];
    rms_norm(x, L.input_norm, y);
    q.noalias() = y * L.wq.transpose();
    k.noalias() = y * L.wk.transpose();
    v.noalias() = y * L.wv.transpose();
    if (L.bq.size() > 0) {
      q.rowwise() += L.bq.transpose();
      k.rowwise() += L.bk.transpose();
      v.rowwise() += L.bv.transpose();
    }
    rotate(q, nh, p0);
    rotate(k, nkv, p0);

    if (L.cache_k.rows() < total) {
      const Eigen::Index cap = std::max<Eigen::Index>({total, 2 * L.cache_k.rows(), 64});
      L.cache_k.conservativeResize(std::min<Eigen::Index>(cap, context_length()), nkv * hd);
      L.cache_v.conservativeResize(std::min<Eigen::Index>(cap, context_length()), nkv * hd);
    }
    L.cache_k.middleRows(p0, n) = k;
    L.cache_v.middleRows(p0, n) = v;

    for (int h = 0; h < nh; ++h) {
      const int g = h / group;
      const auto kh = L.cache_k.block(0, g * hd, total, hd);
      const auto vh = L.cache_v.block(0, g * hd, total, hd);
      scores.noalias() = q.block(0, h * hd, n, hd) * kh.transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index visible = p0 + i + 1;
        auto row = scores.row(i);
        float mx = -INFINITY;
        for (Eigen::Index s = 0; s < visible; ++s) {
          row(s) *= scale;
          mx = std::max(mx, row(s));
        }
        float sum = 0.0f;
        for (Eigen::Index s = 0; s < visible; ++s) {
          row(s) = std::exp(row(s) - mx);
          sum += row(s);
        }
        const float inv = 1.0f / sum;
        for (Eigen::Index s = 0; s < visible; ++s) row(s) *= inv;
        for (Eigen::Index s = visible; s < total; ++s) row(s) = 0.0f;
      }
      attn.block(0, h * hd, n, hd).noalias() = scores * vh;
    }
    x.noalias() += attn * L.wo.transpose();

    rms_norm(x, L.post_norm, y);
    Matrix gate = y * L.gate.transpose();
    const Matrix up = y * L.up.transpose();
    gate = gate.unaryExpr([](float z) { return z / (1.0f + std::exp(-z)); }).cwiseProduct(up);
    x.noalias() += gate * L.down.transpose();

    if (hook) hook(l, p0, std::span<float>(x.data(), static_cast<std::size_t>(n * d)));
  }
  cached_ = static_cast<int>(total);

  Matrix last = x.row(n - 1);
  Matrix normed;
  rms_norm(last, final_norm_, normed);
  const Matrix& head = lm_head_.size() > 0 ? lm_head_ : embed_;
  Eigen::VectorXf logits = head * normed.row(0).transpose();
  return {logits.data(), logits.data() + logits.size()};
}

}  // namespace longsteer
