#pragma once

#include <stdexcept>
#include <string>

namespace swprobe {

// Every rejection raised by the library. `kind` is a short machine-readable
// category used by the CLI error report.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

}  // namespace swprobe
