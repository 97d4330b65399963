#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace geolex::csv {

using Row = std::vector<std::string>;

/// RFC 4180 fields (quotes, embedded commas and newlines). Lines starting
/// with '#' outside quotes are metadata comments and skipped; blank lines too.
std::vector<Row> parse(std::string_view text);

/// Reads a whole file. Throws IoError.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Quotes when the field contains a comma, quote or newline, or starts with
/// '#' (which would otherwise read back as a comment line).
std::string escape(std::string_view field);
std::string join(const Row& row);

/// "%.10g" in the C locale; -0 prints as 0.
std::string format_double(double v);

/// Header lookup; throws DataError naming `what` when a column is missing.
std::size_t column(const Row& header, std::string_view name, std::string_view what);

}  // namespace geolex::csv
