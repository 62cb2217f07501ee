#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include <unistd.h>

#include "longsteer/error.hpp"

namespace test_util {

// Empty scratch directory, unique per process and name.
inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("longsteer-test-" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs f and returns the library error code it throws; fails the caller's
// expectation by returning nullopt when nothing is thrown.
inline std::optional<longsteer::Errc> error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const longsteer::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace test_util
