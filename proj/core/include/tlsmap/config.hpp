#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tlsmap {

// Flat INI-style text: "[section]" headers, "key = value" lines, '#' or ';'
// comments. Keys may repeat; values accumulate in file order.
class IniFile {
 public:
  static IniFile parse(std::string_view text);
  static IniFile load(const std::filesystem::path& path);

  // Last value for section.key, or nullptr.
  const std::string* get(std::string_view section, std::string_view key) const;
  std::vector<std::string> get_all(std::string_view section, std::string_view key) const;

  // All "section.key" names present, for unknown-key validation.
  std::vector<std::string> keys() const;

 private:
  std::map<std::string, std::vector<std::string>> values_;  // "section.key"
};

}  // namespace tlsmap
