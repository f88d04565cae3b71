#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vws::csv {

/// One data row together with its 1-based line number in the source.
struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// A parsed CSV document whose header matched the expected schema exactly.
struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// 0-based index of a header column; throws if absent.
    std::size_t column(std::string_view name) const;
};

/// Splits on ',' without quoting support; the project schemas never quote.
std::vector<std::string> split_line(std::string_view line);

/// Parses text and requires the header to equal `expected_header` (comma-joined).
Table parse(std::string_view text, std::string_view expected_header, std::string source = "<memory>");
Table read_file(const std::string& path, std::string_view expected_header);

/// Field accessors raising CsvError with line and 1-based column on failure.
std::optional<double> optional_number(const Table& t, const Row& r, std::size_t col);
double number(const Table& t, const Row& r, std::size_t col);
const std::string& text(const Table& t, const Row& r, std::size_t col);

/// Fixed-format number rendering used for every emitted artifact.
std::string fmt(double value, int decimals = 6);
std::string fmt_or_na(const std::optional<double>& value, int decimals = 6);

/// Accumulates lines and writes them with '\n' terminators.
class Writer {
public:
    explicit Writer(std::string_view header) { lines_.emplace_back(header); }
    void row(const std::vector<std::string>& fields);
    std::string str() const;
    void save(const std::string& path) const;

private:
    std::vector<std::string> lines_;
};

std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view content);

} // namespace vws::csv
