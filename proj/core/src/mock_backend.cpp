#include "longsteer/mock_backend.hpp"

#include <cmath>
#include <sstream>

#include "longsteer/error.hpp"

namespace longsteer {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

float uniform(std::uint64_t& state) {
  // [-1, 1)
  return static_cast<float>(static_cast<double>(splitmix64(state) >> 11) *
                                (1.0 / 9007199254740992.0) * 2.0 -
                            1.0);
}

}  // namespace

MockOptions MockOptions::from_json(const BackendSpec& spec) {
  MockOptions o;
  if (!spec.model_id.empty()) o.model_id = spec.model_id;
  const auto& j = spec.options;
  o.num_layers = j.value("num_layers", o.num_layers);
  o.hidden_dim = j.value("hidden_dim", o.hidden_dim);
  o.context_length = j.value("context_length", o.context_length);
  o.attention_window = j.value("attention_window", o.attention_window);
  o.seed = j.value("seed", o.seed);
  return o;
}

MockBackend::MockBackend(MockOptions options) : options_(std::move(options)) {
  if (options_.num_layers < 1 || options_.hidden_dim < 1) {
    throw Error(Errc::kConfigError, "mock backend needs >= 1 layer and dim");
  }
  const auto d = static_cast<std::size_t>(options_.hidden_dim);
  std::uint64_t state = options_.seed * 7919 + 17;
  const float scale = 1.5f / std::sqrt(static_cast<float>(d));
  mix_.resize(static_cast<std::size_t>(options_.num_layers));
  for (auto& w : mix_) {
    w.resize(d * d);
    for (auto& x : w) x = uniform(state) * scale;
  }
  words_.push_back("<eos>");
  ids_["<eos>"] = 0;
  reset();
}

void MockBackend::program_hidden_state(const std::string& text, int layer,
                                       std::vector<float> v) {
  check_layer(layer);
  if (static_cast<int>(v.size()) != hidden_dim()) {
    throw Error(Errc::kDimensionError, "programmed vector has wrong length");
  }
  programmed_[{text, layer}] = std::move(v);
}

std::vector<float> MockBackend::hidden_state(std::string_view text,
                                             int layer) {
  check_layer(layer);
  auto it = programmed_.find({std::string(text), layer});
  if (it != programmed_.end()) {
    encode(text);  // keep the empty-input contract
    return it->second;
  }
  return ModelBackend::hidden_state(text, layer);
}

std::vector<int> MockBackend::tokenize(std::string_view text) const {
  std::lock_guard<std::mutex> lock(vocab_mutex_);
  std::vector<int> ids;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    auto it = ids_.find(word);
    if (it == ids_.end()) {
      const int id = static_cast<int>(words_.size());
      words_.push_back(word);
      it = ids_.emplace(word, id).first;
    }
    ids.push_back(it->second);
  }
  return ids;
}

std::string MockBackend::detokenize(std::span<const int> ids) const {
  std::lock_guard<std::mutex> lock(vocab_mutex_);
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(words_.size())) {
      throw Error(Errc::kInvalidInput, "unknown token id " + std::to_string(id));
    }
    if (!out.empty()) out += ' ';
    out += words_[static_cast<std::size_t>(id)];
  }
  return out;
}

std::vector<float> MockBackend::embedding(int id) const {
  std::string word;
  {
    std::lock_guard<std::mutex> lock(vocab_mutex_);
    word = words_.at(static_cast<std::size_t>(id));
  }
  std::uint64_t state = fnv1a(word) ^ (options_.seed * 0x2545F4914F6CDD1DULL);
  std::vector<float> e(static_cast<std::size_t>(options_.hidden_dim));
  for (auto& x : e) x = uniform(state);
  return e;
}

void MockBackend::reset() {
  inputs_.assign(static_cast<std::size_t>(options_.num_layers), {});
  final_row_.clear();
  cached_ = 0;
  script_.reset();
}

std::vector<float> MockBackend::forward(std::span<const int> tokens,
                                        const BlockHook& hook) {
  ++forward_calls_;
  const auto d = static_cast<std::size_t>(options_.hidden_dim);
  const std::size_t n = tokens.size();
  const bool prefill = cached_ == 0;

  if (prefill && responder_) {
    if (auto reply = responder_(detokenize(tokens))) script_ = tokenize(*reply);
  }

  std::vector<float> x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = embedding(tokens[i]);
    std::copy(e.begin(), e.end(), x.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  if (prefill) last_prefill_.assign(static_cast<std::size_t>(options_.num_layers), {});

  std::vector<float> mean(d);
  for (int l = 0; l < options_.num_layers; ++l) {
    auto& in = inputs_[static_cast<std::size_t>(l)];
    in.insert(in.end(), x.begin(), x.end());
    const auto& w = mix_[static_cast<std::size_t>(l)];
    std::vector<float> out(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      const int t = cached_ + static_cast<int>(i);
      const int s0 = options_.attention_window > 0
                         ? std::max(0, t - options_.attention_window + 1)
                         : 0;
      std::fill(mean.begin(), mean.end(), 0.0f);
      for (int s = s0; s <= t; ++s) {
        for (std::size_t j = 0; j < d; ++j) {
          mean[j] += in[static_cast<std::size_t>(s) * d + j];
        }
      }
      const float inv = 1.0f / static_cast<float>(t - s0 + 1);
      for (std::size_t r = 0; r < d; ++r) {
        float acc = 0.0f;
        for (std::size_t j = 0; j < d; ++j) acc += w[r * d + j] * mean[j] * inv;
        out[i * d + r] = x[i * d + r] + 0.5f * std::tanh(acc);
      }
    }
    x = std::move(out);
    if (hook) hook(l, cached_, std::span<float>(x));
    if (prefill) last_prefill_[static_cast<std::size_t>(l)] = x;
  }
  cached_ += static_cast<int>(n);
  final_row_.assign(x.end() - static_cast<std::ptrdiff_t>(d), x.end());

  std::size_t vocab = 0;
  {
    std::lock_guard<std::mutex> lock(vocab_mutex_);
    vocab = words_.size();
  }
  std::vector<float> logits(vocab);
  for (std::size_t v = 0; v < vocab; ++v) {
    const auto e = embedding(static_cast<int>(v));
    float acc = 0.0f;
    for (std::size_t j = 0; j < d; ++j) acc += e[j] * final_row_[j];
    logits[v] = acc;
  }
  return logits;
}

int MockBackend::select_token(std::span<const float> logits, int step) {
  if (script_) {
    if (step < static_cast<int>(script_->size())) {
      return (*script_)[static_cast<std::size_t>(step)];
    }
    return 0;
  }
  return greedy_argmax(logits);
}

}  // namespace longsteer
