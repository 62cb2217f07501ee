#include "longsteer/error.hpp"

#include <cstdio>
#include <mutex>
#include <vector>

#include "longsteer/log.hpp"

namespace longsteer {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidInput: return "InvalidInput";
    case Errc::kInvalidLayer: return "InvalidLayer";
    case Errc::kDimensionError: return "DimensionError";
    case Errc::kInvalidVector: return "InvalidVector";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kLayerMismatch: return "LayerMismatch";
    case Errc::kMissingField: return "MissingField";
    case Errc::kEmptyMemory: return "EmptyMemory";
    case Errc::kCorruptMemory: return "CorruptMemory";
    case Errc::kCorruptVector: return "CorruptVector";
    case Errc::kParseError: return "ParseError";
    case Errc::kDuplicateId: return "DuplicateId";
    case Errc::kDegenerateInput: return "DegenerateInput";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kContextOverflow: return "ContextOverflow";
    case Errc::kIoError: return "IoError";
    case Errc::kBackendError: return "BackendError";
  }
  return "Unknown";
}

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink() {
  static WarningSink s;
  return s;
}

}  // namespace

void set_warning_sink(WarningSink s) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  sink() = std::move(s);
}

void reset_warning_sink() { set_warning_sink(nullptr); }

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (sink()) {
    sink()(message);
  } else {
    std::fprintf(stderr, "warning: %s\n", message.c_str());
  }
}

WarningCapture::WarningCapture() {
  std::lock_guard<std::mutex> lock(sink_mutex());
  previous_ = sink();
  sink() = [this](const std::string& m) { messages_.push_back(m); };
}

WarningCapture::~WarningCapture() {
  std::lock_guard<std::mutex> lock(sink_mutex());
  sink() = std::move(previous_);
}

bool WarningCapture::contains(const std::string& needle) const {
  for (const auto& m : messages_) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace longsteer
