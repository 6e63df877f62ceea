#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fairgrade {

// Incremental RFC-4180 reader. Quoted fields may contain the delimiter,
// doubled quotes, and embedded line breaks. Holds only one record at a time.
class CsvReader {
  public:
    explicit CsvReader(std::istream& in, char delimiter = ',')
        : in_(in), delimiter_(delimiter) {}

    // Reads the next record into `fields`. Returns false at end of input.
    // `record_number` is 1-based and counts logical records, not lines.
    bool next(std::vector<std::string>& fields);

    uint64_t record_number() const { return record_number_; }

  private:
    std::istream& in_;
    char delimiter_;
    uint64_t record_number_ = 0;
};

class CsvWriter {
  public:
    explicit CsvWriter(std::ostream& out, char delimiter = ',')
        : out_(out), delimiter_(delimiter) {}

    void write_row(const std::vector<std::string>& fields);

  private:
    std::ostream& out_;
    char delimiter_;
};

// Quotes a field only when RFC-4180 requires it.
std::string csv_escape(std::string_view field, char delimiter = ',');

// Shortest-round-trip decimal text for a double ("%.17g" fallback).
std::string format_double(double value);

}  // namespace fairgrade
