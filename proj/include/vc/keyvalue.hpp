#pragma once

// Ordered key=value text blocks: '#' starts a comment, blank lines ignored.
// Doubles are written in shortest round-trip form.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vc {

class KeyValues {
public:
  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value);
  void set_uint(const std::string& key, std::uint64_t value);

  bool contains(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string to_text() const;
  // Throws std::invalid_argument naming the line on malformed input or duplicate keys.
  static KeyValues parse(const std::string& text);

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double value);
double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_uint(const std::string& text, const std::string& what);

}  // namespace vc
