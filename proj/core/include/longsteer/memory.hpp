#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "longsteer/backend.hpp"
#include "longsteer/pipeline.hpp"
#include "longsteer/repr.hpp"

namespace longsteer {

struct MemoryEntry {
  std::vector<float> key;    // question representation
  std::vector<float> value;  // question + vanilla trace representation
  std::string example_id;
  std::string domain;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

// Key/value store of question representations for one model and layer.
// Entries keep insertion order; that order is also the tie-break order for
// retrieval and survives save/load.
class DomainMemory {
 public:
  DomainMemory() = default;
  DomainMemory(std::string model_id, int layer, int dim);

  const std::string& model_id() const { return model_id_; }
  int layer() const { return layer_; }
  int dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

  // Throws DimensionError on length mismatch, InvalidVector on NaN/Inf.
  void add(MemoryEntry entry);

  friend bool operator==(const DomainMemory&, const DomainMemory&) = default;

 private:
  std::string model_id_;
  int layer_ = 0;
  int dim_ = 0;
  std::vector<MemoryEntry> entries_;
};

// key = hidden_state(question), value = hidden_state(question + "\n" + vanilla).
DomainMemory memory_build(std::span<const CoTExample> examples, ModelBackend& backend,
                          int layer, const ExtractionOptions& options = {});

// Cosine similarity in double; a zero-norm operand gives 0.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  std::size_t index;
  double similarity;
};

// Top-k by descending similarity, lower index first on ties. k is clamped to
// the memory size (with a warning).
std::vector<Neighbor> top_k(const DomainMemory& mem, std::span<const float> query, int k);

// Mean of the top-k values as a DOMAIN vector; source_count = effective k.
SteeringVector retrieve_domain_vector(const DomainMemory& mem, std::span<const float> query,
                                      int k);

// GLRM layout (little-endian):
//   "GLRM" | version u32 | model_id (u32 len + UTF-8) | layer u32 | dim u32 |
//   count u64 | count x ([key dim x f32][value dim x f32])
// plus "<path>.json" listing example_id and domain per entry, in order.
inline constexpr std::uint32_t kGlrmVersion = 1;

std::string encode_memory(const DomainMemory& mem);
std::string encode_memory_sidecar(const DomainMemory& mem);
DomainMemory decode_memory(std::string_view bytes, std::string_view sidecar_json);

void save_memory(const std::filesystem::path& path, const DomainMemory& mem);
DomainMemory load_memory(const std::filesystem::path& path);

}  // namespace longsteer
