#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace longsteer {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<int> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const int> ids) const = 0;
  virtual int vocab_size() const = 0;
};

// One token per byte; ids >= 256 are specials and decode to nothing.
class ByteTokenizer final : public Tokenizer {
 public:
  explicit ByteTokenizer(int vocab_size = 256) : vocab_size_(vocab_size) {}
  std::vector<int> encode(std::string_view text) const override;
  std::string decode(std::span<const int> ids) const override;
  int vocab_size() const override { return vocab_size_; }

 private:
  int vocab_size_;
};

// Byte-level BPE as stored in a Hugging Face tokenizer.json (GPT-2, Qwen2,
// Llama 3 families). The pre-tokenizer split is hand-coded; Unicode classes
// are approximated as: ASCII letters and any non-ASCII code point outside
// the common space/punctuation blocks count as letters, ASCII 0-9 as digits.
class BpeTokenizer final : public Tokenizer {
 public:
  enum class Split { kGpt2, kDigitsSingle, kDigitsTriple };

  static BpeTokenizer from_json(const nlohmann::json& tokenizer_json);
  static BpeTokenizer load(const std::filesystem::path& tokenizer_json);

  std::vector<int> encode(std::string_view text) const override;
  std::string decode(std::span<const int> ids) const override;
  int vocab_size() const override { return vocab_size_; }

  // Pre-tokenizer pieces, exposed for tests.
  std::vector<std::string> pretokenize(std::string_view text) const;

  BpeTokenizer(const BpeTokenizer& other);
  BpeTokenizer(BpeTokenizer&&) noexcept;

 private:
  BpeTokenizer() = default;
  void encode_piece(std::string_view piece, std::vector<int>& out) const;

  Split split_ = Split::kDigitsSingle;
  std::unordered_map<std::string, int> vocab_;
  std::vector<std::string> id_to_token_;
  std::map<std::pair<std::string, std::string>, int> merge_rank_;
  std::vector<std::pair<std::string, int>> added_;  // content, id
  std::unordered_map<int, std::string> added_by_id_;
  int vocab_size_ = 0;

  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, std::vector<int>> cache_;
};

// tokenizer.json (BPE) if present, otherwise tokenizer_config.json with
// "tokenizer_class": "ByteTokenizer".
std::unique_ptr<Tokenizer> load_tokenizer(const std::filesystem::path& model_dir,
                                          int vocab_size);

}  // namespace longsteer
