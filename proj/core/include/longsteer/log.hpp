#pragma once

#include <functional>
#include <string>
#include <vector>

namespace longsteer {

// Warnings go through a process-wide sink so tests can capture them.
// The default sink writes "warning: <msg>" to stderr.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void reset_warning_sink();
void warn(const std::string& message);

// Scoped capture, restores the previous sink on destruction.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(const std::string& needle) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace longsteer
