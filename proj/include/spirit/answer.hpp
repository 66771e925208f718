#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace spirit {

// Marker that introduces the final answer statement.
inline constexpr std::string_view kAnswerMarker = "the answer is";

// Text following the last case-insensitive "the answer is" on its line, with
// terminal punctuation and surrounding whitespace stripped. When that text
// contains '=', only the part after the final '=' is returned, so
// "The answer is (300 / 60) = 5" yields "5".
std::optional<std::string> extract_answer(std::string_view generation);

// Drops thousands separators and currency symbols, lower-cases, and
// canonicalizes plain decimals ("12.0" -> "12", "+007.50" -> "7.5").
std::string normalize_answer(std::string_view answer);

bool answers_match(std::string_view a, std::string_view b);

bool contains_answer_marker(std::string_view line);

}  // namespace spirit
