#include "tlsmap/config.hpp"

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

IniFile IniFile::parse(std::string_view text) {
  IniFile ini;
  std::string section;
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(detail::chomp(raw));
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": unterminated section");
      }
      section = detail::to_lower(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = detail::to_lower(detail::trim(line.substr(0, eq)));
    if (key.empty()) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": empty key");
    }
    if (section.empty()) {
      throw Error(ErrorCode::kConfig,
                  "line " + std::to_string(line_no) + ": key '" + key + "' outside a section");
    }
    ini.values_[section + "." + key].emplace_back(detail::trim(line.substr(eq + 1)));
  }
  return ini;
}

IniFile IniFile::load(const std::filesystem::path& path) {
  return parse(detail::read_file(path));
}

const std::string* IniFile::get(std::string_view section, std::string_view key) const {
  auto it = values_.find(std::string(section) + "." + std::string(key));
  if (it == values_.end() || it->second.empty()) return nullptr;
  return &it->second.back();
}

std::vector<std::string> IniFile::get_all(std::string_view section, std::string_view key) const {
  auto it = values_.find(std::string(section) + "." + std::string(key));
  return it == values_.end() ? std::vector<std::string>{} : it->second;
}

std::vector<std::string> IniFile::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

}  // namespace tlsmap
