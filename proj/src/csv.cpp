#include "vws/csv.hpp"

#include "vws/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace vws::csv {

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ValidationError(source + ": missing column '" + std::string(name) + "'");
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

Table parse(std::string_view text, std::string_view expected_header, std::string source) {
    Table t;
    t.source = std::move(source);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!have_header) {
            if (line != expected_header)
                throw CsvError(t.source, line_no, 1,
                               "header '" + std::string(line) + "' does not match '" + std::string(expected_header) + "'");
            t.header = split_line(line);
            have_header = true;
            continue;
        }
        Row r{line_no, split_line(line)};
        if (r.fields.size() != t.header.size())
            throw CsvError(t.source, line_no, std::min(r.fields.size(), t.header.size()) + 1,
                           "expected " + std::to_string(t.header.size()) + " fields, found " +
                               std::to_string(r.fields.size()));
        t.rows.push_back(std::move(r));
    }
    if (!have_header) throw CsvError(t.source, 1, 1, "empty file, expected header '" + std::string(expected_header) + "'");
    return t;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, std::string_view content) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

Table read_file(const std::string& path, std::string_view expected_header) {
    return parse(read_text(path), expected_header, path);
}

std::optional<double> optional_number(const Table& t, const Row& r, std::size_t col) {
    const std::string& s = r.fields.at(col);
    if (s.empty() || s == "NA") return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw CsvError(t.source, r.line, col + 1, "'" + s + "' is not a number in column '" + t.header[col] + "'");
    return v;
}

double number(const Table& t, const Row& r, std::size_t col) {
    auto v = optional_number(t, r, col);
    if (!v) throw CsvError(t.source, r.line, col + 1, "missing value in column '" + t.header[col] + "'");
    return *v;
}

const std::string& text(const Table& t, const Row& r, std::size_t col) {
    const std::string& s = r.fields.at(col);
    if (s.empty()) throw CsvError(t.source, r.line, col + 1, "missing value in column '" + t.header[col] + "'");
    return s;
}

std::string fmt(double value, int decimals) {
    if (value == 0.0) value = 0.0; // drop negative zero
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

std::string fmt_or_na(const std::optional<double>& value, int decimals) {
    return value ? fmt(*value, decimals) : std::string("NA");
}

void Writer::row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += fields[i];
    }
    lines_.push_back(std::move(line));
}

std::string Writer::str() const {
    std::string out;
    for (const auto& l : lines_) {
        out += l;
        out += '\n';
    }
    return out;
}

void Writer::save(const std::string& path) const { write_text(path, str()); }

} // namespace vws::csv
