#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsd {

enum class Errc {
  MalformedDomain,
  UnknownSuffix,
  DimensionMismatch,
  InvalidVector,
  DegenerateVector,
  AdapterUnavailable,
  MissingEmbedding,
  EmptyInput,
  EmptyReferenceSet,
  MalformedRecord,
  UnsortedInput,
  MissingFirstSeen,
  DegenerateLabels,
  SetTooSmall,
  ImpossibleTemplate,
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code);

/// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Prints "warning: <msg>" to stderr. Serialized across threads.
void warn(std::string_view msg);

}  // namespace gsd
