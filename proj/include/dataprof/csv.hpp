#ifndef DATAPROF_CSV_HPP
#define DATAPROF_CSV_HPP

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace dataprof {

// RFC-style delimited text reader: quoted fields may contain the
// delimiter, doubled quotes and newlines. CRLF line ends are accepted.
class CsvReader {
public:
    CsvReader(std::istream& in, char delimiter) : in_(in), delimiter_(delimiter) {}

    // Reads one record into `fields`. Returns false at end of input.
    // The final record may or may not end with a newline.
    bool next(std::vector<std::string>& fields);

    // 1-based line number where the last record started.
    std::size_t record_line() const { return record_line_; }

private:
    std::istream& in_;
    char delimiter_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 1;
};

// Quotes a field if it contains the delimiter, a quote, or a newline.
std::string csv_escape(std::string_view field, char delimiter);

// Joins and escapes a full record, no trailing newline.
std::string csv_join(const std::vector<std::string>& fields, char delimiter);

}  // namespace dataprof

#endif
