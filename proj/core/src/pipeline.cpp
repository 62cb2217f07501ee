#include "longsteer/pipeline.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "longsteer/error.hpp"
#include "longsteer/eval.hpp"
#include "longsteer/vector_io.hpp"

namespace longsteer {

namespace {

std::string required_string(const nlohmann::json& j, const char* field, std::size_t line) {
  const auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    throw Error(Errc::kMissingField,
                std::string("line ") + std::to_string(line) + ": missing '" + field + "'");
  }
  if (!it->is_string()) {
    throw Error(Errc::kParseError,
                std::string("line ") + std::to_string(line) + ": '" + field + "' is not a string");
  }
  return it->get<std::string>();
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::vector<CoTExample> parse_examples(std::istream& in) {
  std::vector<CoTExample> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(Errc::kParseError, "line " + std::to_string(lineno) + ": malformed JSON");
    }
    CoTExample ex;
    ex.example_id = required_string(j, "example_id", lineno);
    ex.question = required_string(j, "question", lineno);
    ex.vanilla_cot = required_string(j, "vanilla_cot", lineno);
    if (j.contains("domain") && j["domain"].is_string()) ex.domain = j["domain"].get<std::string>();
    if (j.contains("long_cot") && !j["long_cot"].is_null()) {
      ex.long_cot = required_string(j, "long_cot", lineno);
    }
    if (!seen.insert(ex.example_id).second) {
      throw Error(Errc::kDuplicateId,
                  "line " + std::to_string(lineno) + ": duplicate example_id " + ex.example_id);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<CoTExample> load_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  try {
    return parse_examples(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + std::string(e.what()));
  }
}

std::string extraction_text(const CoTExample& ex, CotKind kind, const ExtractionOptions& options) {
  std::string q = ex.question;
  if (options.include_instruction) q += "\n" + std::string(kZeroShotInstruction);
  switch (kind) {
    case CotKind::kNone:
      return q;
    case CotKind::kVanilla:
      return q + "\n" + ex.vanilla_cot;
    case CotKind::kLong:
      if (!ex.long_cot) throw Error(Errc::kMissingField, ex.example_id + ": no long_cot");
      return q + "\n" + *ex.long_cot;
  }
  throw Error(Errc::kInvalidInput, "unknown cot kind");
}

nlohmann::json ExtractionManifest::to_json() const {
  nlohmann::json counts_json = nlohmann::json::object();
  for (const auto& [k, n] : counts) counts_json[std::string(to_string(k))] = n;
  return {{"model_id", model_id},
          {"layer", layer},
          {"input_digest", input_digest},
          {"counts", counts_json},
          {"created", created}};
}

ExtractionResult extract_all(std::span<const CoTExample> examples, ModelBackend& backend, int layer,
                             std::span<const CotKind> kinds, const ExtractionOptions& options) {
  backend.check_layer(layer);
  std::array<bool, 3> want{};
  for (auto k : kinds) want[static_cast<std::size_t>(k)] = true;

  ExtractionResult out;
  out.manifest.model_id = backend.model_id();
  out.manifest.layer = layer;
  out.manifest.created = utc_timestamp();
  for (const auto& ex : examples) {
    if (want[2] && !ex.long_cot) {
      throw Error(Errc::kMissingField, ex.example_id + ": long_cot requested but absent");
    }
    for (auto k : {CotKind::kNone, CotKind::kVanilla, CotKind::kLong}) {
      if (!want[static_cast<std::size_t>(k)]) continue;
      RepresentationRecord rec;
      rec.example_id = ex.example_id;
      rec.domain = ex.domain;
      rec.layer = layer;
      rec.cot_kind = k;
      rec.vector = backend.hidden_state(extraction_text(ex, k, options), layer);
      out.records.push_back(std::move(rec));
      ++out.manifest.counts[k];
    }
  }
  return out;
}

int default_layer(int num_layers) {
  if (num_layers < 1) throw Error(Errc::kInvalidLayer, "model has no layers");
  return num_layers / 2;
}

int default_layer(const ModelBackend& backend) { return default_layer(backend.num_layers()); }

DatasetStats dataset_stats(std::span<const CoTExample> examples, const ModelBackend& backend) {
  DatasetStats s;
  s.examples = examples.size();
  if (examples.empty()) return s;
  double vanilla = 0.0, long_total = 0.0;
  std::size_t long_n = 0;
  for (const auto& ex : examples) {
    vanilla += static_cast<double>(backend.encode(ex.vanilla_cot).size());
    if (ex.long_cot) {
      long_total += static_cast<double>(backend.encode(*ex.long_cot).size());
      ++long_n;
    }
  }
  s.mean_vanilla_tokens = vanilla / static_cast<double>(examples.size());
  if (long_n > 0) s.mean_long_tokens = long_total / static_cast<double>(long_n);
  return s;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex = "sha256:";
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xF];
  }
  return hex;
}

}  // namespace longsteer
