#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace longsteer {

// Where in the sequence a residual edit lands.
//   kFirstToken        absolute position 0 of the rendered prompt
//   kLastPromptToken   final prompt position, during prefill
//   kCurrentLastToken  final prompt position during prefill and, under
//                      kEveryStep, the newest position on every decode step
enum class EditPosition : std::uint8_t {
  kFirstToken,
  kLastPromptToken,
  kCurrentLastToken,
};

enum class EditPhase : std::uint8_t { kPrefillOnly, kEveryStep };

std::string_view to_string(EditPosition p);
std::string_view to_string(EditPhase p);
EditPhase parse_edit_phase(std::string_view s);

struct ResidualEdit {
  int layer = 0;
  EditPosition position = EditPosition::kFirstToken;
  std::vector<float> vector;
  float strength = 0.0f;
  EditPhase phase = EditPhase::kPrefillOnly;
};

// h <- h + strength * v, then h <- h * |h| / |h_new|. Arithmetic is done in
// double and rounded back once, so strength 0 and positively collinear v
// reproduce h bit-for-bit. If |h_new| < 1e-12 the edit is skipped and false
// is returned; h is left untouched.
bool apply_norm_preserving_edit(std::span<float> h, std::span<const float> v,
                                double strength);

struct GenerationSettings {
  // Long reasoning traces average a little over 2.6k tokens; 4096 leaves room.
  int max_new_tokens = 4096;
};

struct Generation {
  std::string text;
  std::vector<int> token_ids;  // generated ids, EOS excluded
  int num_tokens = 0;
  bool stopped_at_eos = false;
};

// Invoked after every block with that block's output rows (post-residual)
// for the positions processed in this call. `rows` is row-major,
// n x hidden_dim, and its first row is absolute position `first_position`.
// The hook may edit rows in place before the next block reads them.
using BlockHook =
    std::function<void(int layer, int first_position, std::span<float> rows)>;

// Contract over an autoregressive transformer with a residual stream.
//
// Layer l (0-based) names the residual value leaving block l. Attention and
// MLP outputs stay internal to the adapter. Decoding is greedy; a session is
// single threaded, independent sessions may run concurrently.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual std::string model_id() const = 0;
  virtual int num_layers() const = 0;
  virtual int hidden_dim() const = 0;
  virtual int context_length() const = 0;
  virtual std::optional<int> eos_token() const = 0;

  GenerationSettings& settings() { return settings_; }
  const GenerationSettings& settings() const { return settings_; }

  // Optional wrapper applied to every prompt and extraction string; the
  // literal "{prompt}" is replaced by the text. Off by default.
  void set_chat_template(std::optional<std::string> tmpl) {
    chat_template_ = std::move(tmpl);
  }
  std::string render(std::string_view text) const;

  // Throws InvalidInput on text that is empty after trimming whitespace.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  // Residual value at `layer`, final token of `text`, as float32.
  virtual std::vector<float> hidden_state(std::string_view text, int layer);
  // One pass, every layer. Index i holds layer i.
  std::vector<std::vector<float>> hidden_states(std::string_view text);

  Generation generate_with_edits(std::string_view prompt,
                                 std::span<const ResidualEdit> edits);
  Generation generate(std::string_view prompt) {
    return generate_with_edits(prompt, {});
  }

  void validate_edit(const ResidualEdit& edit) const;
  void check_layer(int layer) const;

 protected:
  virtual std::vector<int> tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const int> ids) const = 0;

  // Drop all cached positions; the next forward starts at position 0.
  virtual void reset() = 0;
  // Append `tokens` after the cached positions and return the logits of the
  // last one. `hook` may be empty.
  virtual std::vector<float> forward(std::span<const int> tokens,
                                     const BlockHook& hook) = 0;
  // Greedy: argmax, lowest id on ties.
  virtual int select_token(std::span<const float> logits, int step);

 private:
  std::vector<int> encode_checked(std::string_view text) const;

  GenerationSettings settings_;
  std::optional<std::string> chat_template_;
};

int greedy_argmax(std::span<const float> logits);

// Adapter registry. "mock" and "transformer" are always available.
struct BackendSpec {
  std::string model_id;
  nlohmann::json options = nlohmann::json::object();
};

using BackendFactory =
    std::function<std::unique_ptr<ModelBackend>(const BackendSpec&)>;

void register_backend(const std::string& name, BackendFactory factory);
std::unique_ptr<ModelBackend> create_backend(const std::string& name,
                                             const BackendSpec& spec);
std::vector<std::string> registered_backends();

}  // namespace longsteer
