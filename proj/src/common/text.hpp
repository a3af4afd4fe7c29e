#ifndef GADA_COMMON_TEXT_HPP
#define GADA_COMMON_TEXT_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gada {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);
std::vector<std::size_t> parse_size_list(std::string_view text, std::string_view what);
std::vector<std::uint64_t> parse_u64_list(std::string_view text, std::string_view what);
std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view s);

template <typename T>
std::string join(const std::vector<T>& xs, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace gada

#endif  // GADA_COMMON_TEXT_HPP
