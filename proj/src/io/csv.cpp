#include "cbr/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cbr/errors.hpp"

namespace cbr::io {

namespace {

std::vector<std::string> split_commas(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                             : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parses_as_number(std::string_view s) {
    const auto t = trim(s);
    if (t.empty()) return false;
    double v = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    return ec == std::errc() && ptr == last;
}

void parse_comment(std::string_view body, std::map<std::string, std::string>& meta) {
    std::size_t i = 0;
    while (i < body.size()) {
        while (i < body.size() && (body[i] == ' ' || body[i] == '\t' || body[i] == ';')) ++i;
        if (i >= body.size()) break;
        std::size_t j = i;
        while (j < body.size() && body[j] != ' ' && body[j] != '\t' && body[j] != ';') ++j;
        const std::string_view token = body.substr(i, j - i);
        const auto eq = token.find('=');
        if (eq != std::string_view::npos && eq > 0) {
            std::string key(token.substr(0, eq));
            if (key == "label") {
                meta[key] = trim(body.substr(i + eq + 1));
                return;
            }
            meta[key] = std::string(token.substr(eq + 1));
        }
        i = j;
    }
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r' || s[a] == '\n')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r' || s[b - 1] == '\n')) --b;
    return std::string(s.substr(a, b - a));
}

double parse_double(std::string_view text, const std::string& where) {
    const auto t = trim(text);
    if (t.empty()) throw ParseError("empty numeric field", where);
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        // from_chars rejects "nan"/"inf" spellings on some inputs; accept them so
        // validation can report the offending value instead of a parse failure.
        if (t == "nan" || t == "NaN" || t == "NAN") return std::nan("");
        throw ParseError("cannot parse number '" + t + "'", where);
    }
    return v;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string where = source + ":" + std::to_string(line_numbers.at(row));
    if (col >= rows.at(row).size()) throw ParseError("missing column " + std::to_string(col + 1), where);
    return parse_double(rows[row][col], where);
}

std::optional<double> CsvTable::optional_number(std::size_t row, std::size_t col) const {
    if (col >= rows.at(row).size() || rows[row][col].empty()) return std::nullopt;
    return number(row, col);
}

std::optional<double> CsvTable::meta_number(const std::string& key) const {
    const auto it = meta.find(key);
    if (it == meta.end()) return std::nullopt;
    return parse_double(it->second, source + ": header " + key);
}

CsvTable parse_csv(std::istream& in, const std::string& source_name) {
    CsvTable table;
    table.source = source_name;
    std::string line;
    std::size_t line_no = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            parse_comment(std::string_view(t).substr(1), table.meta);
            continue;
        }
        auto fields = split_commas(t);
        if (!seen_data && table.header.empty() && !parses_as_number(fields.front())) {
            table.header = std::move(fields);
            continue;
        }
        seen_data = true;
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    return table;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file", path);
    return parse_csv(in, path);
}

}  // namespace cbr::io
