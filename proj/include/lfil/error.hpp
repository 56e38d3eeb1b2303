#pragma once

#include <stdexcept>
#include <string>

namespace lfil {

enum class Errc {
  InvalidParams,
  ConnectivityFailure,
  ParseError,
  ValidationError,
  MissingCoordinates,
  UnknownLink,
  DuplicateLink,
  DisconnectsGraph,
  InvalidScenario,
  Unreachable,
  DimensionMismatch,
  ClassTooSmall,
  SingleClass,
  Diverged,
  ConstantTarget,
  VersionMismatch,
  CorruptModel,
  FingerprintMismatch,
  NoFaultyPoints,
  IoError,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lfil
