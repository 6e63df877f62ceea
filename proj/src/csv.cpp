#include "fairgrade/csv.hpp"

#include <cstdio>
#include <cstring>

namespace fairgrade {

bool CsvReader::next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == EOF) return false;

    std::string field;
    bool quoted = false;
    bool any = false;
    while (true) {
        if (c == EOF) {
            fields.push_back(std::move(field));
            break;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                int peek = in_.get();
                if (peek == '"') {
                    field.push_back('"');
                } else {
                    quoted = false;
                    c = peek;
                    continue;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"' && field.empty() && !any) {
            quoted = true;
        } else if (ch == delimiter_) {
            fields.push_back(std::move(field));
            field.clear();
            any = false;
            c = in_.get();
            continue;
        } else if (ch == '\r') {
            int peek = in_.get();
            if (peek == '\n' || peek == EOF) {
                fields.push_back(std::move(field));
                break;
            }
            field.push_back(ch);
            c = peek;
            continue;
        } else if (ch == '\n') {
            fields.push_back(std::move(field));
            break;
        } else {
            field.push_back(ch);
            any = true;
        }
        c = in_.get();
    }
    ++record_number_;
    return true;
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

void CsvWriter::write_row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out_.put(delimiter_);
        out_ << csv_escape(fields[i], delimiter_);
    }
    out_.put('\n');
}

std::string format_double(double value) {
    char buf[40];
    // Try increasing precision until the text round-trips exactly.
    for (int precision : {15, 16, 17}) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
        double parsed = 0.0;
        std::sscanf(buf, "%lf", &parsed);
        if (parsed == value) return buf;
    }
    return buf;
}

}  // namespace fairgrade
