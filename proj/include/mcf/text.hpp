#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcf {

// Shortest decimal literal that parses back to the identical double.
std::string format_double(double value);

// Strict parse of a whole token; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char separator);

std::string join_doubles(const std::vector<double>& values, std::string_view separator = ",");

} // namespace mcf
