#include "longsteer/repr.hpp"

#include <cmath>
#include <unordered_map>

#include "longsteer/error.hpp"

namespace longsteer {

std::string_view to_string(CotKind k) {
  switch (k) {
    case CotKind::kNone: return "none";
    case CotKind::kVanilla: return "vanilla";
    case CotKind::kLong: return "long";
  }
  return "?";
}

CotKind parse_cot_kind(std::string_view s) {
  if (s == "none" || s == "question") return CotKind::kNone;
  if (s == "vanilla") return CotKind::kVanilla;
  if (s == "long") return CotKind::kLong;
  throw Error(Errc::kConfigError, "unknown cot kind '" + std::string(s) + "'");
}

std::string_view to_string(VectorKind k) {
  return k == VectorKind::kPattern ? "pattern" : "domain";
}

void InjectionConfig::validate() const {
  if (!(lambda_p >= 0.0) || !(lambda_d >= 0.0)) {
    throw Error(Errc::kConfigError, "injection strengths must be >= 0");
  }
  if (k < 1) throw Error(Errc::kConfigError, "k must be >= 1");
  if (layer < 0) throw Error(Errc::kConfigError, "layer must be >= 0");
}

void check_finite(std::span<const float> v, std::string_view what) {
  for (float x : v) {
    if (!std::isfinite(x)) {
      throw Error(Errc::kInvalidVector, std::string(what) + " contains NaN or Inf");
    }
  }
}

SteeringVector contrastive_pattern(std::span<const ContrastPair> pairs) {
  if (pairs.empty()) throw Error(Errc::kEmptyInput, "no long/vanilla pairs");
  const int layer = pairs.front().long_cot.layer;
  const std::size_t dim = pairs.front().long_cot.vector.size();
  if (dim == 0) throw Error(Errc::kDimensionError, "empty representation vector");

  std::vector<double> sum(dim, 0.0);
  for (const auto& p : pairs) {
    if (p.long_cot.layer != layer || p.vanilla_cot.layer != layer) {
      throw Error(Errc::kLayerMismatch, "pairs come from different layers");
    }
    if (p.long_cot.example_id != p.vanilla_cot.example_id) {
      throw Error(Errc::kInvalidInput, "pair mixes examples '" + p.long_cot.example_id +
                                           "' and '" + p.vanilla_cot.example_id + "'");
    }
    if (p.long_cot.vector.size() != dim || p.vanilla_cot.vector.size() != dim) {
      throw Error(Errc::kDimensionError, "representation lengths differ");
    }
    check_finite(p.long_cot.vector, "long representation");
    check_finite(p.vanilla_cot.vector, "vanilla representation");
    for (std::size_t i = 0; i < dim; ++i) {
      sum[i] += static_cast<double>(p.long_cot.vector[i]) -
                static_cast<double>(p.vanilla_cot.vector[i]);
    }
  }
  SteeringVector out;
  out.kind = VectorKind::kPattern;
  out.layer = layer;
  out.source_count = static_cast<int>(pairs.size());
  out.vector.resize(dim);
  const double n = static_cast<double>(pairs.size());
  for (std::size_t i = 0; i < dim; ++i) out.vector[i] = static_cast<float>(sum[i] / n);
  return out;
}

std::vector<ContrastPair> pair_by_example(std::span<const RepresentationRecord> records) {
  std::unordered_map<std::string, const RepresentationRecord*> vanilla;
  for (const auto& r : records) {
    if (r.cot_kind == CotKind::kVanilla) vanilla.emplace(r.example_id, &r);
  }
  std::vector<ContrastPair> pairs;
  for (const auto& r : records) {
    if (r.cot_kind != CotKind::kLong) continue;
    auto it = vanilla.find(r.example_id);
    if (it != vanilla.end()) pairs.push_back({r, *it->second});
  }
  return pairs;
}

std::vector<ResidualEdit> build_edits(const SteeringVector& pattern,
                                      const SteeringVector* domain,
                                      const InjectionConfig& cfg) {
  cfg.validate();
  if (pattern.layer != cfg.layer) {
    throw Error(Errc::kLayerMismatch, "pattern vector is for layer " +
                                          std::to_string(pattern.layer) + ", config uses " +
                                          std::to_string(cfg.layer));
  }
  std::vector<ResidualEdit> edits;
  edits.push_back({cfg.layer, EditPosition::kFirstToken, pattern.vector,
                   static_cast<float>(cfg.lambda_p), EditPhase::kPrefillOnly});
  if (domain != nullptr) {
    if (domain->layer != cfg.layer) {
      throw Error(Errc::kLayerMismatch, "domain vector is for layer " +
                                            std::to_string(domain->layer) + ", config uses " +
                                            std::to_string(cfg.layer));
    }
    const auto pos = cfg.domain_phase == EditPhase::kEveryStep ? EditPosition::kCurrentLastToken
                                                               : EditPosition::kLastPromptToken;
    edits.push_back({cfg.layer, pos, domain->vector, static_cast<float>(cfg.lambda_d),
                     cfg.domain_phase});
  }
  return edits;
}

}  // namespace longsteer
