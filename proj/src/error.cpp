#include "gsd/error.hpp"

#include <iostream>
#include <mutex>

namespace gsd {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MalformedDomain: return "MalformedDomain";
    case Errc::UnknownSuffix: return "UnknownSuffix";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidVector: return "InvalidVector";
    case Errc::DegenerateVector: return "DegenerateVector";
    case Errc::AdapterUnavailable: return "AdapterUnavailable";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyReferenceSet: return "EmptyReferenceSet";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::UnsortedInput: return "UnsortedInput";
    case Errc::MissingFirstSeen: return "MissingFirstSeen";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::SetTooSmall: return "SetTooSmall";
    case Errc::ImpossibleTemplate: return "ImpossibleTemplate";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

void warn(std::string_view msg) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "warning: " << msg << '\n';
}

}  // namespace gsd
