#include "fairgrade/event_log.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include "fairgrade/csv.hpp"

namespace fairgrade {

namespace {

constexpr std::array<std::string_view, kNumEventKinds> kKindNames = {
    "ResourceAccess", "FileUpload",  "FileEdit",     "ForumPost",
    "AssignmentSubmit", "QuizSubmit", "GradeReceived"};

constexpr std::array<std::string_view, kNumRegionCodes> kRegionNames = {
    "NCR", "CAR", "R01", "R02", "R03", "R04A", "R04B", "R05",  "R06",
    "R07", "R08", "R09", "R10", "R11", "R12",  "R13",  "BARMM", "ABROAD"};

constexpr std::array<std::string_view, kNumClusters> kClusterNames = {"NCR", "Luzon", "Mindanao",
                                                                      "Visayas", "Abroad"};

bool parse_u64(std::string_view text, uint64_t& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

bool parse_i64(std::string_view text, int64_t& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

bool parse_f64(std::string_view text, double& out) {
    if (text.empty()) return false;
    char* end = nullptr;
    std::string buf(text);
    out = std::strtod(buf.c_str(), &end);
    return end == buf.c_str() + buf.size();
}

// Exactly five digits, per the canonical id form.
bool parse_five_digit_id(std::string_view text, uint32_t& out) {
    if (text.size() != 5) return false;
    uint32_t value = 0;
    for (char ch : text) {
        if (ch < '0' || ch > '9') return false;
        value = value * 10 + static_cast<uint32_t>(ch - '0');
    }
    out = value;
    return true;
}

std::string field_or_empty(const std::vector<std::string>& fields, size_t i) {
    return i < fields.size() ? fields[i] : std::string();
}

}  // namespace

std::string_view event_kind_name(EventKind kind) {
    return kKindNames[static_cast<size_t>(kind)];
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == text) return static_cast<EventKind>(i);
    }
    return std::nullopt;
}

std::string_view region_code_name(RegionCode code) {
    return kRegionNames[static_cast<size_t>(code)];
}

std::optional<RegionCode> parse_region_code(std::string_view text) {
    for (size_t i = 0; i < kRegionNames.size(); ++i) {
        if (kRegionNames[i] == text) return static_cast<RegionCode>(i);
    }
    return std::nullopt;
}

std::string_view cluster_name(RegionCluster cluster) {
    return kClusterNames[static_cast<size_t>(cluster)];
}

std::optional<RegionCluster> parse_cluster(std::string_view text) {
    for (size_t i = 0; i < kClusterNames.size(); ++i) {
        if (kClusterNames[i] == text) return static_cast<RegionCluster>(i);
    }
    return std::nullopt;
}

ParseStats parse_event_log(std::istream& in, const EventLogSchema& schema,
                           const EventSink& on_event, const RowErrorSink& on_error) {
    CsvReader reader(in, schema.delimiter);
    std::vector<std::string> fields;

    if (!reader.next(fields)) throw DataError("event log: missing header row");
    {
        std::string header;
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) header.push_back(schema.delimiter);
            header += fields[i];
        }
        if (header != kEventCsvHeader)
            throw DataError("event log: header does not match canonical schema: " + header);
    }

    ParseStats stats;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        ++stats.rows;
        const uint64_t row = stats.rows;

        auto fail = [&](std::string_view reason) {
            ++stats.errors;
            on_error(row, reason);
        };

        if (fields.size() != 9) {
            fail("bad field count");
            continue;
        }

        Event event;
        uint32_t id = 0;
        if (!parse_five_digit_id(fields[0], id)) {
            fail("bad student id width");
            continue;
        }
        event.student = StudentId(id);
        if (!parse_five_digit_id(fields[1], id)) {
            fail("bad course id width");
            continue;
        }
        event.course = CourseId(id);

        if (!parse_i64(fields[2], event.timestamp_ms) || event.timestamp_ms <= 0) {
            fail("bad timestamp");
            continue;
        }

        auto kind = parse_event_kind(fields[3]);
        if (!kind) {
            fail("unknown kind");
            continue;
        }
        event.kind = *kind;
        event.object_id = field_or_empty(fields, 4);

        const std::string& text_length_field = fields[5];
        const std::string& due_field = fields[6];
        const std::string& awarded_field = fields[7];
        const std::string& possible_field = fields[8];

        if (event.kind == EventKind::ForumPost) {
            uint64_t len = 0;
            if (!parse_u64(text_length_field, len)) {
                fail(text_length_field.empty() ? "missing text_length" : "bad text_length");
                continue;
            }
            event.text_length = static_cast<uint32_t>(len);
        } else if (!text_length_field.empty()) {
            fail("unexpected text_length");
            continue;
        }

        if (is_submission(event.kind)) {
            if (!due_field.empty()) {
                int64_t due = 0;
                if (!parse_i64(due_field, due) || due <= 0) {
                    fail("bad due_timestamp");
                    continue;
                }
                event.due_timestamp_ms = due;
            }
        } else if (!due_field.empty()) {
            fail("unexpected due_timestamp");
            continue;
        }

        if (event.kind == EventKind::GradeReceived) {
            double awarded = 0.0, possible = 0.0;
            if (awarded_field.empty() || possible_field.empty()) {
                fail("missing points");
                continue;
            }
            if (!parse_f64(awarded_field, awarded) || awarded < 0.0) {
                fail("bad points_awarded");
                continue;
            }
            if (!parse_f64(possible_field, possible) || possible <= 0.0) {
                fail("bad points_possible");
                continue;
            }
            if (awarded > possible) {
                fail("awarded exceeds possible");
                continue;
            }
            event.points_awarded = awarded;
            event.points_possible = possible;
        } else if (!awarded_field.empty() || !possible_field.empty()) {
            fail("unexpected points");
            continue;
        }

        ++stats.events;
        on_event(std::move(event));
    }
    return stats;
}

ParseStats parse_location_log(std::istream& in,
                              const std::function<void(LocationRecord&&)>& on_record,
                              const RowErrorSink& on_error) {
    CsvReader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) throw DataError("location log: missing header row");
    {
        std::string header;
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) header.push_back(',');
            header += fields[i];
        }
        if (header != kLocationCsvHeader)
            throw DataError("location log: header does not match canonical schema: " + header);
    }

    ParseStats stats;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        ++stats.rows;
        const uint64_t row = stats.rows;
        if (fields.size() != 2) {
            ++stats.errors;
            on_error(row, "bad field count");
            continue;
        }
        uint32_t id = 0;
        if (!parse_five_digit_id(fields[0], id)) {
            ++stats.errors;
            on_error(row, "bad student id width");
            continue;
        }
        auto region = parse_region_code(fields[1]);
        if (!region) {
            ++stats.errors;
            on_error(row, "unknown region code");
            continue;
        }
        ++stats.events;
        on_record(LocationRecord{StudentId(id), *region});
    }
    return stats;
}

void write_event_csv_header(std::ostream& out) {
    out << kEventCsvHeader << '\n';
}

void write_event_csv_row(std::ostream& out, const Event& event) {
    out << event.student.str() << ',' << event.course.str() << ',' << event.timestamp_ms << ','
        << event_kind_name(event.kind) << ',' << csv_escape(event.object_id) << ',';
    if (event.text_length) out << *event.text_length;
    out << ',';
    if (event.due_timestamp_ms) out << *event.due_timestamp_ms;
    out << ',';
    if (event.points_awarded) out << format_double(*event.points_awarded);
    out << ',';
    if (event.points_possible) out << format_double(*event.points_possible);
    out << '\n';
}

void write_events_csv(std::ostream& out, const std::vector<Event>& events) {
    write_event_csv_header(out);
    for (const Event& event : events) write_event_csv_row(out, event);
}

void write_locations_csv(std::ostream& out, const std::vector<LocationRecord>& records) {
    out << kLocationCsvHeader << '\n';
    for (const LocationRecord& record : records) {
        out << record.student.str() << ',' << region_code_name(record.region) << '\n';
    }
}

void ErrorCollector::write_csv(std::ostream& out) const {
    out << "row_number,reason\n";
    for (const Entry& entry : rows_) {
        out << entry.row << ',' << csv_escape(entry.reason) << '\n';
    }
}

void TimelineBuilder::add(Event&& event) {
    const uint64_t key =
        (static_cast<uint64_t>(event.student.value) << 20) | static_cast<uint64_t>(event.course.value);
    auto [it, inserted] = buckets_.try_emplace(key);
    if (inserted) {
        it->second.student = event.student;
        it->second.course = event.course;
        order_.push_back(&it->second);
    }
    it->second.events.push_back(std::move(event));
    ++count_;
}

std::vector<StudentTimeline> TimelineBuilder::finalize() {
    std::vector<Bucket*> buckets = std::move(order_);
    std::sort(buckets.begin(), buckets.end(), [](const Bucket* a, const Bucket* b) {
        if (a->student != b->student) return a->student < b->student;
        return a->course < b->course;
    });

    std::vector<StudentTimeline> timelines;
    for (Bucket* bucket : buckets) {
        std::stable_sort(bucket->events.begin(), bucket->events.end(),
                         [](const Event& a, const Event& b) { return a.timestamp_ms < b.timestamp_ms; });
        if (timelines.empty() || timelines.back().student != bucket->student) {
            timelines.push_back(StudentTimeline{bucket->student, {}});
        }
        timelines.back().courses.push_back(CourseEvents{bucket->course, std::move(bucket->events)});
    }
    buckets_.clear();
    order_.clear();
    count_ = 0;
    return timelines;
}

std::vector<StudentTimeline> build_timelines(std::vector<Event>&& events) {
    TimelineBuilder builder;
    for (Event& event : events) builder.add(std::move(event));
    events.clear();
    return builder.finalize();
}

}  // namespace fairgrade
