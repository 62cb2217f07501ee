#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace longsteer {

enum class Errc {
  kInvalidInput,
  kInvalidLayer,
  kDimensionError,
  kInvalidVector,
  kEmptyInput,
  kLayerMismatch,
  kMissingField,
  kEmptyMemory,
  kCorruptMemory,
  kCorruptVector,
  kParseError,
  kDuplicateId,
  kDegenerateInput,
  kConfigError,
  kContextOverflow,
  kIoError,
  kBackendError,
};

std::string_view errc_name(Errc code);

// All library failures are reported as longsteer::Error. The code lets
// callers (and the CLI's exit-code mapping) distinguish failure classes
// without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace longsteer
