#include "rspn/csv.hpp"

#include "rspn/common.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace rspn {

std::optional<std::vector<CsvField>> CsvReader::next()
{
    for (;;) {
        int c = in_.get();
        if (c == EOF) return std::nullopt;
        ++physical_line_;
        if (c == '\n') continue;
        if (c == '\r') {
            if (in_.peek() == '\n') in_.get();
            continue;
        }
        line_ = physical_line_;

        std::vector<CsvField> record;
        CsvField field;
        bool in_quotes = false;
        bool after_quote = false;
        for (;; c = in_.get()) {
            if (in_quotes) {
                if (c == EOF)
                    throw InputError("CSV line " + std::to_string(line_) + ": unterminated quoted field");
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.text.push_back('"');
                    } else {
                        in_quotes = false;
                        after_quote = true;
                    }
                } else {
                    if (c == '\n') ++physical_line_;
                    field.text.push_back(static_cast<char>(c));
                }
                continue;
            }
            if (c == ',' ) {
                record.push_back(std::move(field));
                field = CsvField{};
                after_quote = false;
                continue;
            }
            if (c == '\n' || c == '\r' || c == EOF) {
                if (c == '\r' && in_.peek() == '\n') in_.get();
                record.push_back(std::move(field));
                return record;
            }
            if (c == '"' && field.text.empty() && !field.quoted) {
                in_quotes = true;
                field.quoted = true;
                continue;
            }
            if (after_quote)
                throw InputError("CSV line " + std::to_string(line_) + ": characters after closing quote");
            field.text.push_back(static_cast<char>(c));
        }
    }
}

std::string csv_escape(const std::string &text)
{
    if (!text.empty() && text.find_first_of(",\"\r\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

bool parse_number(std::string_view text, double &out)
{
    const char *first = text.data();
    const char *last = text.data() + text.size();
    while (first != last && std::isspace(static_cast<unsigned char>(*first))) ++first;
    while (last != first && std::isspace(static_cast<unsigned char>(last[-1]))) --last;
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

}
