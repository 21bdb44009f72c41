#include "paircal/detail/csv.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace paircal::detail {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::vector<CsvRow> parse_csv(std::istream& in, const std::string& source_name) {
  std::vector<CsvRow> rows;
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  long line = 1;
  size_t i = 0;
  const size_t n = content.size();
  while (i < n) {
    CsvRow row;
    row.line = line;
    bool row_has_content = false;
    while (true) {
      CsvField field;
      // skip leading spaces outside quotes
      while (i < n && (content[i] == ' ' || content[i] == '\t')) ++i;
      if (i < n && content[i] == '"') {
        field.quoted = true;
        ++i;
        while (true) {
          if (i >= n)
            throw Error(ErrorCode::ParseError,
                        source_name + ": unterminated quote starting near line " +
                            std::to_string(line));
          if (content[i] == '"') {
            if (i + 1 < n && content[i + 1] == '"') {
              field.text += '"';
              i += 2;
            } else {
              ++i;
              break;
            }
          } else {
            if (content[i] == '\n') ++line;
            field.text += content[i++];
          }
        }
        while (i < n && (content[i] == ' ' || content[i] == '\t')) ++i;
      } else {
        while (i < n && content[i] != ',' && content[i] != '\n' && content[i] != '\r')
          field.text += content[i++];
        field.text = trim(field.text);
      }
      row.fields.push_back(std::move(field));
      if (!row.fields.back().text.empty() || row.fields.back().quoted)
        row_has_content = true;

      if (i >= n) break;
      if (content[i] == ',') {
        ++i;
        continue;
      }
      if (content[i] == '\r') {
        ++i;
        if (i < n && content[i] == '\n') ++i;
        ++line;
        break;
      }
      if (content[i] == '\n') {
        ++i;
        ++line;
        break;
      }
      throw Error(ErrorCode::ParseError,
                  source_name + ": unexpected character after quoted field, line " +
                      std::to_string(line));
    }
    if (row_has_content) rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CsvRow> parse_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::ParseError, "cannot open file '" + path + "'");
  return parse_csv(in, path);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

long parse_positive_int(const std::string& text, const std::string& what,
                        const std::string& source, long line) {
  long v = 0;
  const std::string t = trim(text);
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || v <= 0)
    throw Error(ErrorCode::ParseError, source + " line " + std::to_string(line) +
                                           ": " + what + " must be a positive integer, got '" +
                                           text + "'");
  return v;
}

}  // namespace paircal::detail
