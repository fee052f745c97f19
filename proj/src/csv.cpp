#include "dataprof/csv.hpp"

namespace dataprof {

bool CsvReader::next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == std::istream::traits_type::eof()) return false;
    record_line_ = line_;

    std::string field;
    bool in_quotes = false;
    bool had_any = false;

    auto push_field = [&] {
        fields.push_back(field);
        field.clear();
    };

    while (true) {
        if (c == std::istream::traits_type::eof()) {
            push_field();
            return true;
        }
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                int peeked = in_.peek();
                if (peeked == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_;
                field.push_back(ch);
            }
        } else if (ch == '"' && field.empty() && !had_any) {
            in_quotes = true;
            had_any = true;
        } else if (ch == delimiter_) {
            push_field();
            had_any = false;
        } else if (ch == '\n') {
            ++line_;
            push_field();
            return true;
        } else if (ch == '\r' && in_.peek() == '\n') {
            // swallow the CR of a CRLF pair
        } else {
            field.push_back(ch);
            had_any = true;
        }
        c = in_.get();
    }
}

std::string csv_escape(std::string_view field, char delimiter) {
    bool needs_quotes = false;
    for (char ch : field) {
        if (ch == delimiter || ch == '"' || ch == '\n' || ch == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!needs_quotes) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char ch : field) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

std::string csv_join(const std::vector<std::string>& fields, char delimiter) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out.push_back(delimiter);
        out += csv_escape(fields[i], delimiter);
    }
    return out;
}

}  // namespace dataprof
