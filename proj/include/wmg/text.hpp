#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wmg {

std::string trim(std::string_view s);

/// Hyperparameter names as written in LaTeX tables ("A3C $t_{max}$",
/// "Discount factor $\gamma$") and as typed in plain text ("A3C t_max",
/// "Discount factor gamma") map to the same canonical string: `$`, `{`, `}`
/// and `\` are dropped and whitespace runs collapse to one space.
std::string canonical_name(std::string_view name);

std::vector<std::string> split(std::string_view s, char sep);

/// Parses a whole string as a double / unsigned integer; throws
/// std::invalid_argument naming `what` on trailing garbage or overflow.
double parse_double(const std::string& text, const std::string& what);
unsigned long long parse_unsigned(const std::string& text, const std::string& what);

}  // namespace wmg
