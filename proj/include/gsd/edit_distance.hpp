#pragma once

#include <cstddef>
#include <string_view>

namespace gsd {

/// Optimal-string-alignment distance: unit-cost insert, delete, substitute and
/// adjacent transposition, with no substring edited more than once.
std::size_t damerau_levenshtein(std::string_view a, std::string_view b);

/// As damerau_levenshtein, but gives up early and returns `limit + 1` once
/// the distance is known to exceed `limit`.
std::size_t damerau_levenshtein_bounded(std::string_view a, std::string_view b, std::size_t limit);

}  // namespace gsd
