#include "longsteer/memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "longsteer/binary_io.hpp"
#include "longsteer/error.hpp"
#include "longsteer/log.hpp"
#include "longsteer/vector_io.hpp"

namespace longsteer {

namespace {
constexpr std::string_view kMagic = "GLRM";
}

DomainMemory::DomainMemory(std::string model_id, int layer, int dim)
    : model_id_(std::move(model_id)), layer_(layer), dim_(dim) {
  if (dim < 0) throw Error(Errc::kDimensionError, "negative dimension");
}

void DomainMemory::add(MemoryEntry entry) {
  if (static_cast<int>(entry.key.size()) != dim_ || static_cast<int>(entry.value.size()) != dim_) {
    throw Error(Errc::kDimensionError, "entry " + entry.example_id + " has length " +
                                           std::to_string(entry.key.size()) + "/" +
                                           std::to_string(entry.value.size()) + ", memory dim is " +
                                           std::to_string(dim_));
  }
  check_finite(entry.key, "memory key");
  check_finite(entry.value, "memory value");
  entries_.push_back(std::move(entry));
}

DomainMemory memory_build(std::span<const CoTExample> examples, ModelBackend& backend, int layer,
                          const ExtractionOptions& options) {
  backend.check_layer(layer);
  DomainMemory mem(backend.model_id(), layer, backend.hidden_dim());
  for (const auto& ex : examples) {
    if (ex.vanilla_cot.empty()) {
      throw Error(Errc::kMissingField, ex.example_id + ": no vanilla_cot");
    }
    MemoryEntry e;
    e.example_id = ex.example_id;
    e.domain = ex.domain;
    e.key = backend.hidden_state(extraction_text(ex, CotKind::kNone, options), layer);
    e.value = backend.hidden_state(extraction_text(ex, CotKind::kVanilla, options), layer);
    mem.add(std::move(e));
  }
  return mem;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(Errc::kDimensionError, "cosine of unequal lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Neighbor> top_k(const DomainMemory& mem, std::span<const float> query, int k) {
  if (mem.empty()) throw Error(Errc::kEmptyMemory, "memory has no entries");
  if (static_cast<int>(query.size()) != mem.dim()) {
    throw Error(Errc::kDimensionError, "query length " + std::to_string(query.size()) +
                                           " does not match memory dim " + std::to_string(mem.dim()));
  }
  if (k < 1) throw Error(Errc::kInvalidInput, "k must be >= 1");
  check_finite(query, "query");
  std::size_t kk = static_cast<std::size_t>(k);
  if (kk > mem.size()) {
    warn("k=" + std::to_string(k) + " exceeds memory size " + std::to_string(mem.size()) +
         ", using " + std::to_string(mem.size()));
    kk = mem.size();
  }
  std::vector<Neighbor> all;
  all.reserve(mem.size());
  for (std::size_t i = 0; i < mem.size(); ++i) {
    all.push_back({i, cosine_similarity(mem.entries()[i].key, query)});
  }
  const auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.index < b.index;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kk), all.end(), better);
  all.resize(kk);
  return all;
}

SteeringVector retrieve_domain_vector(const DomainMemory& mem, std::span<const float> query, int k) {
  const auto nn = top_k(mem, query, k);
  std::vector<double> acc(static_cast<std::size_t>(mem.dim()), 0.0);
  for (const auto& n : nn) {
    const auto& v = mem.entries()[n.index].value;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  SteeringVector out;
  out.kind = VectorKind::kDomain;
  out.layer = mem.layer();
  out.source_count = static_cast<int>(nn.size());
  out.vector.resize(acc.size());
  const double n = static_cast<double>(nn.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out.vector[i] = static_cast<float>(acc[i] / n);
  return out;
}

std::string encode_memory(const DomainMemory& mem) {
  bin::Writer w;
  w.bytes(kMagic);
  w.u32(kGlrmVersion);
  w.str(mem.model_id());
  w.u32(static_cast<std::uint32_t>(mem.layer()));
  w.u32(static_cast<std::uint32_t>(mem.dim()));
  w.u64(mem.size());
  for (const auto& e : mem.entries()) {
    w.f32s(e.key);
    w.f32s(e.value);
  }
  return w.data();
}

std::string encode_memory_sidecar(const DomainMemory& mem) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : mem.entries()) {
    entries.push_back({{"example_id", e.example_id}, {"domain", e.domain}});
  }
  nlohmann::json j = {{"model_id", mem.model_id()},
                      {"layer", mem.layer()},
                      {"dim", mem.dim()},
                      {"entries", entries}};
  return j.dump(2) + "\n";
}

DomainMemory decode_memory(std::string_view bytes, std::string_view sidecar_json) {
  bin::Reader r(bytes, Errc::kCorruptMemory);
  if (r.bytes(4) != kMagic) throw Error(Errc::kCorruptMemory, "bad magic, expected GLRM");
  const auto version = r.u32();
  if (version != kGlrmVersion) {
    throw Error(Errc::kCorruptMemory, "unsupported GLRM version " + std::to_string(version));
  }
  auto model_id = r.str();
  const auto layer = r.u32();
  const auto dim = r.u32();
  const auto count = r.u64();
  if (count != 0 && r.remaining() / count < static_cast<std::uint64_t>(dim) * 8) {
    throw Error(Errc::kCorruptMemory, "entry table shorter than header claims");
  }
  if (r.remaining() != count * dim * 8) {
    throw Error(Errc::kCorruptMemory, "entry table length does not match header");
  }

  nlohmann::json side = nlohmann::json::array();
  if (!sidecar_json.empty()) {
    auto j = nlohmann::json::parse(sidecar_json, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
      throw Error(Errc::kCorruptMemory, "memory sidecar is malformed");
    }
    side = j["entries"];
    if (side.size() != count) {
      throw Error(Errc::kCorruptMemory, "sidecar lists " + std::to_string(side.size()) +
                                            " entries, binary has " + std::to_string(count));
    }
  }

  DomainMemory mem(std::move(model_id), static_cast<int>(layer), static_cast<int>(dim));
  for (std::uint64_t i = 0; i < count; ++i) {
    MemoryEntry e;
    e.key = r.f32s(dim);
    e.value = r.f32s(dim);
    if (!side.empty()) {
      e.example_id = side[i].value("example_id", "");
      e.domain = side[i].value("domain", "");
    }
    try {
      mem.add(std::move(e));
    } catch (const Error& err) {
      throw Error(Errc::kCorruptMemory, err.what());
    }
  }
  return mem;
}

void save_memory(const std::filesystem::path& path, const DomainMemory& mem) {
  bin::write_file(path, encode_memory(mem));
  bin::write_file(sidecar_path(path), encode_memory_sidecar(mem));
}

DomainMemory load_memory(const std::filesystem::path& path) {
  const auto bytes = bin::read_file(path);
  std::string side;
  if (std::filesystem::exists(sidecar_path(path))) side = bin::read_file(sidecar_path(path));
  return decode_memory(bytes, side);
}

}  // namespace longsteer
