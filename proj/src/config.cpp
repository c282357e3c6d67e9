#include "ecgdg/config.hpp"

#include <fstream>
#include <sstream>

#include "ecgdg/errors.hpp"

namespace ecgdg {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_string(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(ErrorCode::InvalidConfig,
             origin + ":" + std::to_string(lineno) + ": unterminated section header");
      current = trim(line.substr(1, line.size() - 2));
      kv.sections[current];  // section may stay empty
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::InvalidConfig,
           origin + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(ErrorCode::InvalidConfig, origin + ":" + std::to_string(lineno) + ": empty key");
    auto& section = kv.sections[current];
    if (section.count(key))
      fail(ErrorCode::InvalidConfig,
           origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    section[key] = value;
  }
  return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

std::string KeyValueFile::render() const {
  std::string out;
  for (const auto& [name, section] : sections) {
    if (!name.empty()) out += "[" + name + "]\n";
    for (const auto& [key, value] : section) out += key + " = " + value + "\n";
    out += "\n";
  }
  return out;
}

void KeyValueFile::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write config: " + path);
  out << render();
}

const std::map<std::string, std::string>& KeyValueFile::section(const std::string& name) const {
  static const std::map<std::string, std::string> empty;
  auto it = sections.find(name);
  return it == sections.end() ? empty : it->second;
}

void require_known_keys(const std::map<std::string, std::string>& kv,
                        const std::set<std::string>& allowed, const std::string& origin) {
  for (const auto& [key, value] : kv) {
    (void)value;
    if (!allowed.count(key))
      fail(ErrorCode::UnknownKey, origin + ": unknown key '" + key + "'");
  }
}

}  // namespace ecgdg
