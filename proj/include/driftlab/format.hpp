#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Fixed-point with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

// Scientific notation with `significant` significant digits ("6.6e-06").
std::string format_scientific(double value, int significant);

// RFC 4180 quoting when the field contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

std::string csv_row(const std::vector<std::string>& fields);

// Minimal CSV line splitter understanding the quoting produced by csv_escape.
std::vector<std::string> csv_split(std::string_view line);

std::string xml_escape(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace driftlab
