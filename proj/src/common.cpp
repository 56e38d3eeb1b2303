#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <cstdio>

namespace lfil {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::ConnectivityFailure: return "ConnectivityFailure";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::MissingCoordinates: return "MissingCoordinates";
    case Errc::UnknownLink: return "UnknownLink";
    case Errc::DuplicateLink: return "DuplicateLink";
    case Errc::DisconnectsGraph: return "DisconnectsGraph";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::Unreachable: return "Unreachable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::SingleClass: return "SingleClass";
    case Errc::Diverged: return "Diverged";
    case Errc::ConstantTarget: return "ConstantTarget";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptModel: return "CorruptModel";
    case Errc::FingerprintMismatch: return "FingerprintMismatch";
    case Errc::NoFaultyPoints: return "NoFaultyPoints";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

std::string fingerprint_hex(const std::string& content) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : content) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lfil
