#include "longsteer/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <fstream>

#include "longsteer/error.hpp"

namespace longsteer {

std::vector<int> ByteTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(c);
  return ids;
}

std::string ByteTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= vocab_size_) {
      throw Error(Errc::kInvalidInput, "token id " + std::to_string(id) +
                                           " outside the vocabulary");
    }
    if (id < 256) out.push_back(static_cast<char>(id));
  }
  return out;
}

namespace {

struct CodePoint {
  char32_t cp;
  std::size_t len;
};

CodePoint next_cp(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto byte = [&](std::size_t k) {
    return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
  };
  if (c < 0x80) return {c, 1};
  if ((c & 0xE0) == 0xC0 && cont(1)) {
    return {(static_cast<char32_t>(c & 0x1F) << 6) | byte(1), 2};
  }
  if ((c & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    return {(static_cast<char32_t>(c & 0x0F) << 12) | (byte(1) << 6) | byte(2),
            3};
  }
  if ((c & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    return {(static_cast<char32_t>(c & 0x07) << 18) | (byte(1) << 12) |
                (byte(2) << 6) | byte(3),
            4};
  }
  return {0xFFFD, 1};
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t cp) {
  switch (cp) {
    case ' ': case '\t': case '\n': case '\v': case '\f': case '\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_letter(char32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  if (is_space(cp)) return false;
  if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if ((cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20)) {
    return false;
  }
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;
  return true;
}

bool is_newline(char32_t cp) { return cp == '\r' || cp == '\n'; }

bool is_other(char32_t cp) {
  return !is_space(cp) && !is_letter(cp) && !is_digit(cp);
}

const std::array<char32_t, 256>& byte_to_cp() {
  static const std::array<char32_t, 256> table = [] {
    std::array<char32_t, 256> t{};
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[static_cast<std::size_t>(b)] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[static_cast<std::size_t>(b)] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[static_cast<std::size_t>(b)] = true;
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      t[static_cast<std::size_t>(b)] =
          direct[static_cast<std::size_t>(b)] ? static_cast<char32_t>(b) : next++;
    }
    return t;
  }();
  return table;
}

int cp_to_byte(char32_t cp) {
  const auto& t = byte_to_cp();
  for (int b = 0; b < 256; ++b) {
    if (t[static_cast<std::size_t>(b)] == cp) return b;
  }
  return -1;
}

// Length in bytes of an apostrophe contraction starting at i, or 0.
std::size_t contraction(std::string_view s, std::size_t i, bool ignore_case) {
  if (s[i] != '\'') return 0;
  auto lower = [&](std::size_t k) -> char {
    if (i + k >= s.size()) return '\0';
    char c = s[i + k];
    if (ignore_case && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return c;
  };
  const char a = lower(1);
  const char b = lower(2);
  if ((a == 'r' && b == 'e') || (a == 'v' && b == 'e') || (a == 'l' && b == 'l')) {
    return 3;
  }
  if (a == 's' || a == 't' || a == 'm' || a == 'd') return 2;
  return 0;
}

}  // namespace

BpeTokenizer::BpeTokenizer(const BpeTokenizer& other)
    : split_(other.split_),
      vocab_(other.vocab_),
      id_to_token_(other.id_to_token_),
      merge_rank_(other.merge_rank_),
      added_(other.added_),
      added_by_id_(other.added_by_id_),
      vocab_size_(other.vocab_size_) {}

BpeTokenizer::BpeTokenizer(BpeTokenizer&& other) noexcept
    : split_(other.split_),
      vocab_(std::move(other.vocab_)),
      id_to_token_(std::move(other.id_to_token_)),
      merge_rank_(std::move(other.merge_rank_)),
      added_(std::move(other.added_)),
      added_by_id_(std::move(other.added_by_id_)),
      vocab_size_(other.vocab_size_) {}

BpeTokenizer BpeTokenizer::from_json(const nlohmann::json& j) {
  BpeTokenizer t;
  const auto& model = j.at("model");
  if (model.value("type", std::string("BPE")) != "BPE") {
    throw Error(Errc::kConfigError, "tokenizer model is not BPE");
  }
  int max_id = -1;
  for (const auto& [token, id] : model.at("vocab").items()) {
    const int i = id.get<int>();
    t.vocab_[token] = i;
    max_id = std::max(max_id, i);
  }
  int rank = 0;
  for (const auto& m : model.at("merges")) {
    std::string a;
    std::string b;
    if (m.is_string()) {
      const auto s = m.get<std::string>();
      const auto sp = s.find(' ');
      if (sp == std::string::npos) {
        throw Error(Errc::kParseError, "bad merge entry '" + s + "'");
      }
      a = s.substr(0, sp);
      b = s.substr(sp + 1);
    } else {
      a = m.at(0).get<std::string>();
      b = m.at(1).get<std::string>();
    }
    t.merge_rank_.emplace(std::make_pair(a, b), rank++);
  }
  if (j.contains("added_tokens")) {
    for (const auto& a : j["added_tokens"]) {
      const int id = a.at("id").get<int>();
      const auto content = a.at("content").get<std::string>();
      t.added_.emplace_back(content, id);
      t.added_by_id_[id] = content;
      max_id = std::max(max_id, id);
    }
    // Longest first so overlapping specials resolve to the longer one.
    std::stable_sort(t.added_.begin(), t.added_.end(),
                     [](const auto& x, const auto& y) {
                       return x.first.size() > y.first.size();
                     });
  }
  t.vocab_size_ = max_id + 1;
  t.id_to_token_.resize(static_cast<std::size_t>(t.vocab_size_));
  for (const auto& [token, id] : t.vocab_) {
    t.id_to_token_[static_cast<std::size_t>(id)] = token;
  }
  const std::string pre =
      j.contains("pre_tokenizer") ? j["pre_tokenizer"].dump() : std::string();
  if (pre.find("p{N}{1,3}") != std::string::npos) {
    t.split_ = Split::kDigitsTriple;
  } else if (pre.find("Split") != std::string::npos &&
             pre.find("p{N}") != std::string::npos) {
    t.split_ = Split::kDigitsSingle;
  } else {
    t.split_ = Split::kGpt2;
  }
  return t;
}

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, path.string() + ": " + e.what());
  }
}

std::vector<std::string> BpeTokenizer::pretokenize(std::string_view s) const {
  std::vector<std::string> pieces;
  const std::size_t n = s.size();
  std::size_t i = 0;
  const bool gpt2 = split_ == Split::kGpt2;

  auto run = [&](std::size_t from, auto pred) {
    std::size_t k = from;
    while (k < n) {
      const auto c = next_cp(s, k);
      if (!pred(c.cp)) break;
      k += c.len;
    }
    return k;
  };

  while (i < n) {
    const auto cur = next_cp(s, i);
    std::size_t end = 0;

    if (const auto c = contraction(s, i, !gpt2)) {
      end = i + c;
    } else if (gpt2) {
      std::size_t k = i;
      if (cur.cp == ' ' && i + 1 < n) k = i + 1;
      const auto nxt = k < n ? next_cp(s, k).cp : U'\0';
      if (k < n && is_letter(nxt)) {
        end = run(k, is_letter);
      } else if (k < n && is_digit(nxt)) {
        end = run(k, is_digit);
      } else if (k < n && is_other(nxt)) {
        end = run(k, is_other);
      }
    } else {
      if (is_letter(cur.cp)) {
        end = run(i, is_letter);
      } else if (!is_newline(cur.cp) && !is_digit(cur.cp) && i + cur.len < n &&
                 is_letter(next_cp(s, i + cur.len).cp)) {
        end = run(i + cur.len, is_letter);
      } else if (is_digit(cur.cp)) {
        const std::size_t limit = split_ == Split::kDigitsTriple ? 3 : 1;
        end = i;
        for (std::size_t d = 0; d < limit && end < n && is_digit(s[end] & 0xFF);
             ++d) {
          ++end;
        }
      } else {
        std::size_t k = i;
        if (cur.cp == ' ' && i + 1 < n && is_other(next_cp(s, i + 1).cp)) {
          k = i + 1;
        }
        if (is_other(next_cp(s, k).cp)) {
          end = run(k, is_other);
          while (end < n && (s[end] == '\r' || s[end] == '\n')) ++end;
        }
      }
    }

    if (end == 0 && is_space(cur.cp)) {
      const std::size_t ws_end = run(i, is_space);
      std::size_t last_nl = std::string::npos;
      std::size_t last_start = i;
      for (std::size_t k = i; k < ws_end;) {
        const auto c = next_cp(s, k);
        if (is_newline(c.cp)) last_nl = k;
        last_start = k;
        k += c.len;
      }
      if (!gpt2 && last_nl != std::string::npos) {
        end = last_nl + 1;
      } else if (ws_end == n || last_start == i) {
        end = ws_end;
      } else {
        end = last_start;
      }
    }
    if (end <= i) end = i + cur.len;  // lone code point no rule claims
    pieces.emplace_back(s.substr(i, end - i));
    i = end;
  }
  return pieces;
}

void BpeTokenizer::encode_piece(std::string_view piece,
                                std::vector<int>& out) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(std::string(piece));
    if (it != cache_.end()) {
      out.insert(out.end(), it->second.begin(), it->second.end());
      return;
    }
  }
  std::vector<std::string> symbols;
  symbols.reserve(piece.size());
  for (unsigned char b : piece) {
    std::string sym;
    append_utf8(sym, byte_to_cp()[b]);
    symbols.push_back(std::move(sym));
  }
  while (symbols.size() > 1) {
    int best_rank = INT_MAX;
    std::size_t best = 0;
    for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
      auto it = merge_rank_.find({symbols[k], symbols[k + 1]});
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = k;
      }
    }
    if (best_rank == INT_MAX) break;
    const std::string a = symbols[best];
    const std::string b = symbols[best + 1];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t k = 0; k < symbols.size(); ++k) {
      if (k + 1 < symbols.size() && symbols[k] == a && symbols[k + 1] == b) {
        merged.push_back(a + b);
        ++k;
      } else {
        merged.push_back(symbols[k]);
      }
    }
    symbols = std::move(merged);
  }
  std::vector<int> ids;
  for (const auto& sym : symbols) {
    auto it = vocab_.find(sym);
    if (it == vocab_.end()) {
      throw Error(Errc::kInvalidInput, "symbol missing from BPE vocabulary");
    }
    ids.push_back(it->second);
  }
  out.insert(out.end(), ids.begin(), ids.end());
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.emplace(std::string(piece), std::move(ids));
}

std::vector<int> BpeTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    // Next special token occurrence, if any.
    std::size_t hit = std::string_view::npos;
    const std::pair<std::string, int>* which = nullptr;
    for (const auto& a : added_) {
      const auto at = text.find(a.first, i);
      if (at != std::string_view::npos && (hit == std::string_view::npos || at < hit)) {
        hit = at;
        which = &a;
      }
    }
    const auto chunk = text.substr(i, hit == std::string_view::npos ? std::string_view::npos
                                                                    : hit - i);
    for (const auto& piece : pretokenize(chunk)) encode_piece(piece, ids);
    if (which == nullptr) break;
    ids.push_back(which->second);
    i = hit + which->first.size();
  }
  return ids;
}

std::string BpeTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (auto it = added_by_id_.find(id); it != added_by_id_.end()) {
      out += it->second;
      continue;
    }
    if (id < 0 || id >= vocab_size_ ||
        id_to_token_[static_cast<std::size_t>(id)].empty()) {
      throw Error(Errc::kInvalidInput, "token id " + std::to_string(id) +
                                           " outside the vocabulary");
    }
    const auto& tok = id_to_token_[static_cast<std::size_t>(id)];
    for (std::size_t k = 0; k < tok.size();) {
      const auto c = next_cp(tok, k);
      const int b = cp_to_byte(c.cp);
      if (b >= 0) out.push_back(static_cast<char>(b));
      k += c.len;
    }
  }
  return out;
}

std::unique_ptr<Tokenizer> load_tokenizer(const std::filesystem::path& dir,
                                          int vocab_size) {
  if (std::filesystem::exists(dir / "tokenizer.json")) {
    return std::make_unique<BpeTokenizer>(BpeTokenizer::load(dir / "tokenizer.json"));
  }
  const auto cfg_path = dir / "tokenizer_config.json";
  if (std::filesystem::exists(cfg_path)) {
    std::ifstream in(cfg_path);
    const auto cfg = nlohmann::json::parse(in, nullptr, false);
    if (!cfg.is_discarded() &&
        cfg.value("tokenizer_class", std::string()) == "ByteTokenizer") {
      return std::make_unique<ByteTokenizer>(vocab_size);
    }
  }
  throw Error(Errc::kConfigError,
              "no supported tokenizer in " + dir.string() +
                  " (need tokenizer.json or a ByteTokenizer tokenizer_config.json)");
}

}  // namespace longsteer
