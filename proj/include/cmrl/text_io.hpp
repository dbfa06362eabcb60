#pragma once

// Helpers for the comma-separated text formats used by checkpoints and
// history files. Reals are written with 17 significant digits so that a
// write/read cycle reproduces the exact bit pattern.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmrl::text {

std::string format_real(double value);
double parse_real(std::string_view field);
std::uint64_t parse_uint(std::string_view field);
std::int64_t parse_int(std::string_view field);

std::vector<std::string_view> split(std::string_view line, char sep = ',');
// The views would outlive the temporary; use split_owned instead.
std::vector<std::string_view> split(std::string&& line, char sep = ',') = delete;
std::vector<std::string> split_owned(std::string_view line, char sep = ',');

/// Appends ",v0,v1,..." to `out`.
void append_reals(std::string& out, std::span<const double> values);

/// Reads one line, skipping blank lines. Returns false at end of stream.
bool next_line(std::istream& in, std::string& line);

/// Reads a line and fails with FormatError if the stream is exhausted.
std::string expect_line(std::istream& in, std::string_view what);

/// Parses `fields[first, first+count)` as reals; FormatError if too few fields.
std::vector<double> parse_reals(std::span<const std::string_view> fields, std::size_t first,
                                std::size_t count);
std::vector<double> parse_reals(std::span<const std::string> fields, std::size_t first, std::size_t count);

}  // namespace cmrl::text
