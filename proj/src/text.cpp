#include "wmg/text.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <stdexcept>

namespace wmg {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string canonical_name(std::string_view name) {
  std::string out;
  bool space = false;
  for (char c : name) {
    if (c == '$' || c == '{' || c == '}' || c == '\\') continue;
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw std::invalid_argument(what + ": expected a number, got '" + text + "'");
  }
  return v;
}

unsigned long long parse_unsigned(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  // Accept integral values written in float notation, e.g. "1e6".
  if (!t.empty() && t.find_first_of(".eE") != std::string::npos) {
    const double v = parse_double(t, what);
    if (v < 0 || v != static_cast<double>(static_cast<unsigned long long>(v))) {
      throw std::invalid_argument(what + ": expected a non-negative integer, got '" + text + "'");
    }
    return static_cast<unsigned long long>(v);
  }
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE) {
    throw std::invalid_argument(what + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

}  // namespace wmg
