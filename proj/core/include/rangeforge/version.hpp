#pragma once

#include <string_view>

namespace rangeforge {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kJournalFormat = "rangeforge.journal/1";

}  // namespace rangeforge
