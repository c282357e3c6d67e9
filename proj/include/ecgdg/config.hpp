#pragma once

#include <map>
#include <set>
#include <string>

namespace ecgdg {

// Sectioned key=value text. Sections are "[name]" lines; "#" starts a
// comment; keys within a section are unique. The same grammar serves trainer
// configs, model configs, experiment configs and run-directory echoes.
struct KeyValueFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static KeyValueFile parse_string(const std::string& text, const std::string& origin);
  static KeyValueFile parse_file(const std::string& path);

  // Deterministic rendering (sections and keys sorted).
  std::string render() const;
  void save(const std::string& path) const;

  const std::map<std::string, std::string>& section(const std::string& name) const;
  bool has_section(const std::string& name) const { return sections.count(name) != 0; }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    sections[section][key] = value;
  }
};

// Rejects keys outside the allowed set (unknown keys are an error, never
// silently ignored).
void require_known_keys(const std::map<std::string, std::string>& kv,
                        const std::set<std::string>& allowed, const std::string& origin);

}  // namespace ecgdg
