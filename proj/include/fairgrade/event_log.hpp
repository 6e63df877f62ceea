#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fairgrade/events.hpp"

namespace fairgrade {

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Canonical event-log schema. The header row must match exactly.
inline constexpr std::string_view kEventCsvHeader =
    "student_id,course_id,timestamp_ms,kind,object_id,text_length,"
    "due_timestamp_ms,points_awarded,points_possible";

inline constexpr std::string_view kLocationCsvHeader = "student_id,region_code";

struct EventLogSchema {
    char delimiter = ',';
};

using EventSink = std::function<void(Event&&)>;

// Row-level validation failure: 1-based data row number plus a short reason.
using RowErrorSink = std::function<void(uint64_t row, std::string_view reason)>;

struct ParseStats {
    uint64_t rows = 0;    // data rows seen (header excluded)
    uint64_t events = 0;  // rows that became Events
    uint64_t errors = 0;  // rows routed to the error sink
};

// Single-pass streaming parse. Malformed rows go to `on_error` with the row
// number and reason; an unreadable or mismatched header throws DataError.
ParseStats parse_event_log(std::istream& in, const EventLogSchema& schema,
                           const EventSink& on_event, const RowErrorSink& on_error);

ParseStats parse_location_log(std::istream& in,
                              const std::function<void(LocationRecord&&)>& on_record,
                              const RowErrorSink& on_error);

void write_event_csv_header(std::ostream& out);
void write_event_csv_row(std::ostream& out, const Event& event);
void write_events_csv(std::ostream& out, const std::vector<Event>& events);

void write_locations_csv(std::ostream& out, const std::vector<LocationRecord>& records);

// Collects parse failures into the documented error-sink format
// (row_number,reason).
class ErrorCollector {
  public:
    void operator()(uint64_t row, std::string_view reason) {
        rows_.push_back({row, std::string(reason)});
    }

    struct Entry {
        uint64_t row;
        std::string reason;
    };

    const std::vector<Entry>& entries() const { return rows_; }
    bool empty() const { return rows_.empty(); }
    size_t size() const { return rows_.size(); }

    void write_csv(std::ostream& out) const;

  private:
    std::vector<Entry> rows_;
};

// Groups a stream of events into per-student, per-course, time-ordered
// timelines. Events with equal timestamps keep their add order.
class TimelineBuilder {
  public:
    void add(Event&& event);

    // Sorts each course's events by timestamp (stable on ties) and returns
    // timelines ascending by student id. The builder is left empty.
    std::vector<StudentTimeline> finalize();

    size_t event_count() const { return count_; }

  private:
    struct Bucket {
        StudentId student;
        CourseId course;
        std::vector<Event> events;
    };
    std::vector<Bucket*> order_;  // insertion order of (student, course) keys
    std::unordered_map<uint64_t, Bucket> buckets_;
    size_t count_ = 0;
};

std::vector<StudentTimeline> build_timelines(std::vector<Event>&& events);

}  // namespace fairgrade
