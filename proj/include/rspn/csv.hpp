#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string_view>
#include <string>
#include <vector>

namespace rspn {

/// One CSV field. An unquoted empty field is NULL; a quoted empty field ("") is the empty string.
struct CsvField
{
    std::string text;
    bool quoted = false;

    bool is_null() const noexcept { return !quoted && text.empty(); }
};

/// RFC-4180 reader: comma separated, double-quote quoting with "" escapes, quoted fields may span lines, LF or CRLF
/// line endings.
class CsvReader
{
    std::istream &in_;
    std::size_t line_ = 0;

  public:
    explicit CsvReader(std::istream &in) : in_(in) { }

    /// Reads the next record. Returns nullopt at end of input. Blank lines are skipped.
    std::optional<std::vector<CsvField>> next();

    /// 1-based line number where the most recently returned record started.
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t physical_line_ = 0;
};

/// Parses a finite decimal number, allowing surrounding blanks and a leading '+'.
bool parse_number(std::string_view text, double &out);

/// Quotes a field if it contains a separator, quote, or line break, or if it is the empty string.
std::string csv_escape(const std::string &text);

}
