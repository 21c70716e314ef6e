#pragma once

#include <stdexcept>
#include <string>

namespace dreamsplat {

// Invalid arguments are reported with std::invalid_argument throughout.

/// A point resolved to a camera-frame depth at or behind the near plane.
class BehindCameraError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file content (PLY, PNG, JSON).
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures: missing files, unwritable outputs.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A model backend could not serve a request. `transcript` carries whatever
/// the remote side said (status line, body excerpt) for diagnostics.
class BackendUnavailable : public std::runtime_error {
public:
  BackendUnavailable(const std::string &what, std::string transcript = {})
      : std::runtime_error(what), transcript_(std::move(transcript)) {}

  const std::string &transcript() const noexcept { return transcript_; }

private:
  std::string transcript_;
};

/// The oracle-directory inpainter has no ground-truth frame for a step.
class OracleMiss : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace dreamsplat
