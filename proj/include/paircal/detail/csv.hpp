#pragma once

#include <istream>
#include <string>
#include <vector>

#include "paircal/error.hpp"

namespace paircal::detail {

struct CsvField {
  std::string text;
  bool quoted = false;
};

struct CsvRow {
  std::vector<CsvField> fields;
  long line = 0;  // 1-based line number of the row start
};

/// Parses comma-separated content with double-quote quoting ("" escapes a
/// quote inside a quoted field). Keeps track of which fields were quoted so
/// covariate type inference can honor quoted-means-categorical. Skips blank
/// lines. Throws ParseError with the offending line number.
std::vector<CsvRow> parse_csv(std::istream& in, const std::string& source_name);

std::vector<CsvRow> parse_csv_file(const std::string& path);

/// Strict double parser: the whole trimmed field must consume. Returns false
/// on failure instead of throwing so callers can do type inference.
bool parse_double(const std::string& text, double& out);

long parse_positive_int(const std::string& text, const std::string& what,
                        const std::string& source, long line);

}  // namespace paircal::detail
