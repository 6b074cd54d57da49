#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gmr3::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
};

/// RFC-4180 reader: quoted fields, embedded separators, doubled quotes, CRLF.
Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a separator, quote or newline.
std::string escape(const std::string& field);
void write_row(std::ostream& out, const Row& row);

}  // namespace gmr3::csv
