#pragma once

// Minimal CSV helpers shared by the design, response and field-map readers.

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace gdoe::csv {

/// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

/// Reads the next non-blank line (CR stripped). Returns false at EOF.
bool next_line(std::istream& in, std::string& line);

/// Quotes a field only if it contains a comma, quote, or newline.
std::string escape(std::string_view field);

std::string trim(std::string_view text);

/// Shortest round-trip representation of a double.
std::string format_double(double value);

/// Strict double parse of the whole field; returns false on trailing junk.
bool parse_double(std::string_view text, double& out);

}  // namespace gdoe::csv
