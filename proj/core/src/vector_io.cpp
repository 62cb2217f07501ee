#include "longsteer/vector_io.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "longsteer/binary_io.hpp"
#include "longsteer/error.hpp"

namespace longsteer {

namespace bin {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIoError, "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(Errc::kIoError, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kIoError, "cannot rename onto " + path.string() + ": " + ec.message());
}

}  // namespace bin

namespace {

constexpr std::string_view kMagic = "GLRV";

void read_header(bin::Reader& r, std::uint8_t& kind, std::uint32_t& layer, std::uint32_t& dim,
                 std::uint32_t& count) {
  if (r.bytes(4) != kMagic) throw Error(Errc::kCorruptVector, "bad magic, expected GLRV");
  const auto version = r.u32();
  if (version != kGlrvVersion) {
    throw Error(Errc::kCorruptVector, "unsupported GLRV version " + std::to_string(version));
  }
  kind = r.u8();
  layer = r.u32();
  dim = r.u32();
  count = r.u32();
}

}  // namespace

std::string encode_steering_vector(const SteeringVector& v) {
  if (v.source_count < 1) throw Error(Errc::kInvalidInput, "source_count must be >= 1");
  check_finite(v.vector, "steering vector");
  bin::Writer w;
  w.bytes(kMagic);
  w.u32(kGlrvVersion);
  w.u8(static_cast<std::uint8_t>(v.kind));
  w.u32(static_cast<std::uint32_t>(v.layer));
  w.u32(static_cast<std::uint32_t>(v.vector.size()));
  w.u32(static_cast<std::uint32_t>(v.source_count));
  w.f32s(v.vector);
  return w.data();
}

SteeringVector decode_steering_vector(std::string_view bytes) {
  bin::Reader r(bytes, Errc::kCorruptVector);
  std::uint8_t kind = 0;
  std::uint32_t layer = 0, dim = 0, count = 0;
  read_header(r, kind, layer, dim, count);
  if (kind > 1) throw Error(Errc::kCorruptVector, "container does not hold a single vector");
  if (count < 1) throw Error(Errc::kCorruptVector, "source_count is zero");
  if (r.remaining() != static_cast<std::size_t>(dim) * 4) {
    throw Error(Errc::kCorruptVector, "payload length does not match dim");
  }
  SteeringVector v;
  v.kind = static_cast<VectorKind>(kind);
  v.layer = static_cast<int>(layer);
  v.source_count = static_cast<int>(count);
  v.vector = r.f32s(dim);
  return v;
}

std::string encode_records(std::span<const RepresentationRecord> records) {
  const std::uint32_t dim =
      records.empty() ? 0 : static_cast<std::uint32_t>(records.front().vector.size());
  std::uint32_t layer = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().layer);
  for (const auto& r : records) {
    if (r.vector.size() != dim) throw Error(Errc::kDimensionError, "record lengths differ");
    if (static_cast<std::uint32_t>(r.layer) != layer) layer = kMixedLayers;
  }
  bin::Writer w;
  w.bytes(kMagic);
  w.u32(kGlrvVersion);
  w.u8(kGlrvRecordSet);
  w.u32(layer);
  w.u32(dim);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    w.u8(static_cast<std::uint8_t>(r.cot_kind));
    w.u32(static_cast<std::uint32_t>(r.layer));
    w.str(r.example_id);
    w.str(r.domain);
    w.f32s(r.vector);
  }
  return w.data();
}

std::vector<RepresentationRecord> decode_records(std::string_view bytes) {
  bin::Reader r(bytes, Errc::kCorruptVector);
  std::uint8_t kind = 0;
  std::uint32_t layer = 0, dim = 0, count = 0;
  read_header(r, kind, layer, dim, count);
  if (kind != kGlrvRecordSet) throw Error(Errc::kCorruptVector, "container is not a record set");
  std::vector<RepresentationRecord> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RepresentationRecord rec;
    const auto ck = r.u8();
    if (ck > 2) throw Error(Errc::kCorruptVector, "bad cot kind byte");
    rec.cot_kind = static_cast<CotKind>(ck);
    rec.layer = static_cast<int>(r.u32());
    rec.example_id = r.str();
    rec.domain = r.str();
    rec.vector = r.f32s(dim);
    out.push_back(std::move(rec));
  }
  if (!r.done()) throw Error(Errc::kCorruptVector, "trailing bytes after record table");
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
  const auto text = bin::read_file(sidecar_path(path));
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kParseError, sidecar_path(path).string() + " is not JSON");
  return j;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void save_steering_vector(const std::filesystem::path& path, const SteeringVector& v,
                          const std::string& model_id, const nlohmann::json& extra) {
  bin::write_file(path, encode_steering_vector(v));
  nlohmann::json side = extra.is_object() ? extra : nlohmann::json::object();
  side["model_id"] = model_id;
  side["created"] = utc_timestamp();
  side["kind"] = std::string(to_string(v.kind));
  side["layer"] = v.layer;
  side["dim"] = v.dim();
  side["source_count"] = v.source_count;
  bin::write_file(sidecar_path(path), side.dump(2) + "\n");
}

SteeringVector load_steering_vector(const std::filesystem::path& path) {
  return decode_steering_vector(bin::read_file(path));
}

void save_records(const std::filesystem::path& path,
                  std::span<const RepresentationRecord> records) {
  bin::write_file(path, encode_records(records));
}

std::vector<RepresentationRecord> load_records(const std::filesystem::path& path) {
  return decode_records(bin::read_file(path));
}

}  // namespace longsteer
