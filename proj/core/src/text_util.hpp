#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tlsmap::detail {

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);
std::string to_lower(std::string_view text);
bool iequals(std::string_view a, std::string_view b);

// Strips a trailing '\r' so CRLF files read like LF files.
std::string_view chomp(std::string_view line);

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  text = trim(text);
  Int value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view text);

// Shortest round-trip decimal rendering; stable across runs.
std::string format_double(double value);
std::string format_fixed(double value, int precision);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tlsmap::detail
