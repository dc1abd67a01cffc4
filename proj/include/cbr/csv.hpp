#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cbr::io {

// Parsed comma-separated table. Comment lines start with '#'; any
// `key=value` tokens found in them land in `meta` (a `label=` token takes the
// rest of its line). The first non-comment row is treated as a header when it
// does not parse as numbers.
struct CsvTable {
    std::map<std::string, std::string> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
    std::string source;

    std::optional<std::size_t> column(std::string_view name) const;
    double number(std::size_t row, std::size_t col) const;  // throws ParseError
    std::optional<double> optional_number(std::size_t row, std::size_t col) const;
    std::optional<double> meta_number(const std::string& key) const;
};

CsvTable parse_csv(std::istream& in, const std::string& source_name);
CsvTable read_csv_file(const std::string& path);

double parse_double(std::string_view text, const std::string& where);
std::string trim(std::string_view s);

// Shortest round-trip decimal text for a double; used by every writer so
// reruns are byte-identical.
std::string format_double(double v);

}  // namespace cbr::io
