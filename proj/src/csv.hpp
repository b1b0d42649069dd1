#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace groupmatch::csv {

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines and a
/// leading UTF-8 BOM. Blank lines are skipped.
std::vector<Record> read_all(std::istream& in, char delimiter);

/// Quotes `field` if it contains the delimiter, a quote or a line break.
std::string escape(std::string_view field, char delimiter);

std::string_view trim(std::string_view s);

}  // namespace groupmatch::csv
