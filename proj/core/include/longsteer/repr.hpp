#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "longsteer/backend.hpp"

namespace longsteer {

// Which string a representation was read from: the bare question, the
// question followed by a short (vanilla) trace, or by a long trace.
enum class CotKind : std::uint8_t { kNone = 0, kVanilla = 1, kLong = 2 };

std::string_view to_string(CotKind k);
CotKind parse_cot_kind(std::string_view s);

struct RepresentationRecord {
  std::string example_id;
  std::string domain;
  int layer = 0;
  CotKind cot_kind = CotKind::kNone;
  std::vector<float> vector;
};

enum class VectorKind : std::uint8_t { kPattern = 0, kDomain = 1 };

std::string_view to_string(VectorKind k);

struct SteeringVector {
  VectorKind kind = VectorKind::kPattern;
  int layer = 0;
  std::vector<float> vector;
  int source_count = 1;

  int dim() const { return static_cast<int>(vector.size()); }
};

struct InjectionConfig {
  double lambda_p = 0.1;
  double lambda_d = 0.1;
  int layer = 0;
  int k = 8;
  EditPhase domain_phase = EditPhase::kPrefillOnly;

  void validate() const;
};

// One long/vanilla pair for the same question.
struct ContrastPair {
  const RepresentationRecord& long_cot;
  const RepresentationRecord& vanilla_cot;
};

// Mean over pairs of (long - vanilla). Accumulates in double, rounds once.
// Throws EmptyInput, LayerMismatch, DimensionError, InvalidInput (example id
// mismatch inside a pair) or InvalidVector (non-finite entries).
SteeringVector contrastive_pattern(std::span<const ContrastPair> pairs);

// Pairs every LONG record with the VANILLA record of the same example id,
// in the order the LONG records appear. Unmatched records are skipped.
std::vector<ContrastPair> pair_by_example(std::span<const RepresentationRecord> records);

// One FIRST_TOKEN/PREFILL_ONLY edit for the pattern vector and, when a
// domain vector is given, one edit at the prompt's last token
// (CURRENT_LAST_TOKEN when the domain phase is EVERY_STEP).
std::vector<ResidualEdit> build_edits(const SteeringVector& pattern,
                                      const SteeringVector* domain,
                                      const InjectionConfig& cfg);

void check_finite(std::span<const float> v, std::string_view what);

}  // namespace longsteer
