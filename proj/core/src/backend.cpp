#include "longsteer/backend.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "longsteer/error.hpp"
#include "longsteer/log.hpp"
#include "longsteer/mock_backend.hpp"
#include "longsteer/transformer_backend.hpp"

namespace longsteer {

std::string_view to_string(EditPosition p) {
  switch (p) {
    case EditPosition::kFirstToken: return "first_token";
    case EditPosition::kLastPromptToken: return "last_prompt_token";
    case EditPosition::kCurrentLastToken: return "current_last_token";
  }
  return "?";
}

std::string_view to_string(EditPhase p) {
  return p == EditPhase::kPrefillOnly ? "prefill_only" : "every_step";
}

EditPhase parse_edit_phase(std::string_view s) {
  if (s == "prefill_only" || s == "prefill") return EditPhase::kPrefillOnly;
  if (s == "every_step") return EditPhase::kEveryStep;
  throw Error(Errc::kConfigError, "unknown domain phase '" + std::string(s) +
                                      "' (expected prefill_only or every_step)");
}

bool apply_norm_preserving_edit(std::span<float> h, std::span<const float> v,
                                double strength) {
  if (h.size() != v.size()) {
    throw Error(Errc::kDimensionError,
                "edit vector has " + std::to_string(v.size()) +
                    " entries, hidden state has " + std::to_string(h.size()));
  }
  std::vector<double> edited(h.size());
  double norm_sq = 0.0;
  double edited_sq = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double hi = h[i];
    edited[i] = hi + strength * static_cast<double>(v[i]);
    norm_sq += hi * hi;
    edited_sq += edited[i] * edited[i];
  }
  const double edited_norm = std::sqrt(edited_sq);
  if (edited_norm < 1e-12) return false;
  const double scale = std::sqrt(norm_sq) / edited_norm;
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] = static_cast<float>(edited[i] * scale);
  }
  return true;
}

int greedy_argmax(std::span<const float> logits) {
  if (logits.empty()) throw Error(Errc::kBackendError, "empty logits");
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

std::string ModelBackend::render(std::string_view text) const {
  if (!chat_template_) return std::string(text);
  std::string out = *chat_template_;
  const auto at = out.find("{prompt}");
  if (at == std::string::npos) {
    throw Error(Errc::kConfigError, "chat template lacks {prompt}");
  }
  out.replace(at, 8, text);
  return out;
}

std::vector<int> ModelBackend::encode(std::string_view text) const {
  const auto first = text.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) {
    throw Error(Errc::kInvalidInput, "text is empty");
  }
  return tokenize(text);
}

std::string ModelBackend::decode(std::span<const int> ids) const {
  return detokenize(ids);
}

std::vector<int> ModelBackend::encode_checked(std::string_view text) const {
  auto ids = encode(render(text));
  if (ids.empty()) throw Error(Errc::kInvalidInput, "text produced no tokens");
  if (static_cast<int>(ids.size()) > context_length()) {
    throw Error(Errc::kContextOverflow,
                std::to_string(ids.size()) + " tokens exceed the context length " +
                    std::to_string(context_length()));
  }
  return ids;
}

void ModelBackend::check_layer(int layer) const {
  if (layer < 0 || layer >= num_layers()) {
    throw Error(Errc::kInvalidLayer,
                "layer " + std::to_string(layer) + " outside [0, " +
                    std::to_string(num_layers()) + ")");
  }
}

std::vector<float> ModelBackend::hidden_state(std::string_view text,
                                              int layer) {
  check_layer(layer);
  const auto ids = encode_checked(text);
  std::vector<float> out;
  reset();
  forward(ids, [&](int l, int first, std::span<float> rows) {
    if (l != layer) return;
    const int last = static_cast<int>(ids.size()) - 1 - first;
    const auto d = static_cast<std::size_t>(hidden_dim());
    auto row = rows.subspan(static_cast<std::size_t>(last) * d, d);
    out.assign(row.begin(), row.end());
  });
  reset();
  return out;
}

std::vector<std::vector<float>> ModelBackend::hidden_states(
    std::string_view text) {
  const auto ids = encode_checked(text);
  std::vector<std::vector<float>> out(static_cast<std::size_t>(num_layers()));
  reset();
  forward(ids, [&](int l, int first, std::span<float> rows) {
    const int last = static_cast<int>(ids.size()) - 1 - first;
    const auto d = static_cast<std::size_t>(hidden_dim());
    auto row = rows.subspan(static_cast<std::size_t>(last) * d, d);
    out[static_cast<std::size_t>(l)].assign(row.begin(), row.end());
  });
  reset();
  return out;
}

void ModelBackend::validate_edit(const ResidualEdit& edit) const {
  check_layer(edit.layer);
  if (static_cast<int>(edit.vector.size()) != hidden_dim()) {
    throw Error(Errc::kDimensionError,
                "edit vector length " + std::to_string(edit.vector.size()) +
                    " != hidden_dim " + std::to_string(hidden_dim()));
  }
  if (!std::isfinite(edit.strength)) {
    throw Error(Errc::kInvalidVector, "edit strength is not finite");
  }
  for (float x : edit.vector) {
    if (!std::isfinite(x)) {
      throw Error(Errc::kInvalidVector, "edit vector contains NaN or Inf");
    }
  }
  if (edit.position == EditPosition::kFirstToken &&
      edit.phase != EditPhase::kPrefillOnly) {
    throw Error(Errc::kInvalidInput,
                "first-token edits only exist during prefill");
  }
}

int ModelBackend::select_token(std::span<const float> logits, int /*step*/) {
  return greedy_argmax(logits);
}

namespace {

void apply_at(const ResidualEdit& e, std::span<float> row, int position) {
  if (!apply_norm_preserving_edit(row, e.vector, e.strength)) {
    warn("edit at layer " + std::to_string(e.layer) + ", position " +
         std::to_string(position) +
         " cancels the hidden state; keeping the unedited value");
  }
}

}  // namespace

Generation ModelBackend::generate_with_edits(
    std::string_view prompt, std::span<const ResidualEdit> edits) {
  for (const auto& e : edits) validate_edit(e);
  const auto ids = encode_checked(prompt);
  const int n_prompt = static_cast<int>(ids.size());
  const auto d = static_cast<std::size_t>(hidden_dim());

  BlockHook prefill_hook;
  BlockHook step_hook;
  if (!edits.empty()) {
    prefill_hook = [&](int layer, int first, std::span<float> rows) {
      for (const auto& e : edits) {
        if (e.layer != layer) continue;
        int pos = -1;
        if (e.position == EditPosition::kFirstToken) {
          pos = 0;
        } else {
          pos = n_prompt - 1;
        }
        const int local = pos - first;
        if (local < 0 || static_cast<std::size_t>(local) * d >= rows.size()) {
          continue;
        }
        apply_at(e, rows.subspan(static_cast<std::size_t>(local) * d, d), pos);
      }
    };
    step_hook = [&](int layer, int first, std::span<float> rows) {
      for (const auto& e : edits) {
        if (e.layer != layer || e.phase != EditPhase::kEveryStep) continue;
        // Decode steps carry one row: the current last position.
        const std::size_t n = rows.size() / d;
        apply_at(e, rows.subspan((n - 1) * d, d),
                 first + static_cast<int>(n) - 1);
      }
    };
  }

  Generation gen;
  const int max_new = settings_.max_new_tokens;
  reset();
  auto logits = forward(ids, prefill_hook);
  int position = n_prompt;
  for (int step = 0; step < max_new; ++step) {
    const int tok = select_token(logits, step);
    if (eos_token() && tok == *eos_token()) {
      gen.stopped_at_eos = true;
      break;
    }
    gen.token_ids.push_back(tok);
    if (static_cast<int>(gen.token_ids.size()) == max_new) break;
    if (position >= context_length()) {
      warn("generation reached the context length " +
           std::to_string(context_length()) + "; stopping");
      break;
    }
    const int next[1] = {tok};
    logits = forward(next, step_hook);
    ++position;
  }
  reset();
  gen.num_tokens = static_cast<int>(gen.token_ids.size());
  gen.text = detokenize(gen.token_ids);
  return gen;
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, BackendFactory>& registry() {
  static std::map<std::string, BackendFactory> r = [] {
    std::map<std::string, BackendFactory> m;
    m["mock"] = [](const BackendSpec& spec) -> std::unique_ptr<ModelBackend> {
      return std::make_unique<MockBackend>(MockOptions::from_json(spec));
    };
    m["transformer"] =
        [](const BackendSpec& spec) -> std::unique_ptr<ModelBackend> {
      return TransformerBackend::load(resolve_model_dir(spec.model_id));
    };
    return m;
  }();
  return r;
}

}  // namespace

void register_backend(const std::string& name, BackendFactory factory) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[name] = std::move(factory);
}

std::unique_ptr<ModelBackend> create_backend(const std::string& name,
                                             const BackendSpec& spec) {
  BackendFactory factory;
  {
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end()) {
      throw Error(Errc::kConfigError, "no backend adapter named '" + name + "'");
    }
    factory = it->second;
  }
  return factory(spec);
}

std::vector<std::string> registered_backends() {
  std::lock_guard<std::mutex> lock(registry_mutex());
  std::vector<std::string> names;
  for (const auto& [k, _] : registry()) names.push_back(k);
  return names;
}

}  // namespace longsteer
