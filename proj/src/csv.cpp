#include "csv.hpp"

#include <istream>
#include <iterator>

#include "groupmatch/dataset.hpp"

namespace groupmatch::csv {

std::vector<Record> read_all(std::istream& in, char delimiter) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) pos = 3;

  std::vector<Record> out;
  std::size_t line = 1;
  while (pos < text.size()) {
    Record rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool quoted = false;
    bool done = false;
    while (!done) {
      if (pos >= text.size()) {
        if (in_quotes) throw DataError("line " + std::to_string(rec.line) + ": unterminated quoted field");
        rec.fields.push_back(std::move(field));
        break;
      }
      char c = text[pos++];
      if (in_quotes) {
        if (c == '"') {
          if (pos < text.size() && text[pos] == '"') {
            field.push_back('"');
            ++pos;
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"' && trim(field).empty() && !quoted) {
        field.clear();
        in_quotes = true;
        quoted = true;
      } else if (c == delimiter) {
        rec.fields.push_back(std::move(field));
        field.clear();
        quoted = false;
      } else if (c == '\r' || c == '\n') {
        if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
        ++line;
        rec.fields.push_back(std::move(field));
        done = true;
      } else {
        field.push_back(c);
      }
    }
    bool blank = rec.fields.size() == 1 && trim(rec.fields[0]).empty() && !quoted;
    if (!blank) out.push_back(std::move(rec));
  }
  return out;
}

std::string escape(std::string_view field, char delimiter) {
  bool needs = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace groupmatch::csv
