#include "cmrl/text_io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>

#include "cmrl/errors.hpp"

namespace cmrl::text {

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw FormatError("cannot format real");
  return std::string(buf, end);
}

double parse_real(std::string_view field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || end != field.data() + field.size()) {
    throw FormatError("not a real number: '" + std::string(field) + "'");
  }
  return value;
}

std::uint64_t parse_uint(std::string_view field) {
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || end != field.data() + field.size()) {
    throw FormatError("not an unsigned integer: '" + std::string(field) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view field) {
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || end != field.data() + field.size()) {
    throw FormatError("not an integer: '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::vector<std::string> split_owned(std::string_view line, char sep) {
  std::vector<std::string> owned;
  for (auto f : split(line, sep)) owned.emplace_back(f);
  return owned;
}

void append_reals(std::string& out, std::span<const double> values) {
  for (double v : values) {
    out += ',';
    out += format_real(v);
  }
}

bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

std::string expect_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!next_line(in, line)) throw FormatError("unexpected end of input while reading " + std::string(what));
  return line;
}

std::vector<double> parse_reals(std::span<const std::string_view> fields, std::size_t first,
                                std::size_t count) {
  if (fields.size() < first + count) throw FormatError("too few fields on line");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = parse_real(fields[first + i]);
  return values;
}

std::vector<double> parse_reals(std::span<const std::string> fields, std::size_t first, std::size_t count) {
  std::vector<std::string_view> views(fields.begin(), fields.end());
  return parse_reals(std::span<const std::string_view>(views), first, count);
}

}  // namespace cmrl::text
