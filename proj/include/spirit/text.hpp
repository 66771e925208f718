#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spirit::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
// Pieces between separators; empty input gives no pieces.
std::vector<std::string> split_on(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Position of the last case-insensitive occurrence of `needle`, or npos.
std::size_t rfind_icase(std::string_view haystack, std::string_view needle);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace spirit::text
