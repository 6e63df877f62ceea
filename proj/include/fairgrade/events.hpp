#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairgrade/ids.hpp"
#include "fairgrade/region.hpp"

namespace fairgrade {

enum class EventKind : uint8_t {
    ResourceAccess,
    FileUpload,
    FileEdit,
    ForumPost,
    AssignmentSubmit,
    QuizSubmit,
    GradeReceived,
};

constexpr int kNumEventKinds = 7;

std::string_view event_kind_name(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

constexpr bool is_submission(EventKind kind) {
    return kind == EventKind::AssignmentSubmit || kind == EventKind::QuizSubmit;
}

// One timestamped student action. Conditional fields are populated only for
// the kinds that carry them: text_length for ForumPost, due_timestamp_ms for
// submissions, points for GradeReceived.
struct Event {
    StudentId student;
    CourseId course;
    int64_t timestamp_ms = 0;  // UTC epoch milliseconds, > 0
    EventKind kind = EventKind::ResourceAccess;
    std::string object_id;
    std::optional<uint32_t> text_length;
    std::optional<int64_t> due_timestamp_ms;
    std::optional<double> points_awarded;
    std::optional<double> points_possible;

    bool operator==(const Event&) const = default;
};

// Events of one student in one course, ascending by timestamp
// (ties keep input order).
struct CourseEvents {
    CourseId course;
    std::vector<Event> events;
};

struct StudentTimeline {
    StudentId student;
    std::vector<CourseEvents> courses;  // ascending by course id

    size_t event_count() const {
        size_t n = 0;
        for (const auto& c : courses) n += c.events.size();
        return n;
    }
};

// One observed connection of a student from a region.
struct LocationRecord {
    StudentId student;
    RegionCode region = RegionCode::NCR;

    bool operator==(const LocationRecord&) const = default;
};

}  // namespace fairgrade
