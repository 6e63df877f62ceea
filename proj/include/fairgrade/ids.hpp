#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>

namespace fairgrade {

// Canvas-style 5-digit numeric identifiers. Canonical text form is
// zero-padded to exactly 5 digits ("00042").
namespace detail {

constexpr uint32_t kMaxFiveDigitId = 99999;

inline std::string format_five_digit(uint32_t value) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%05u", value);
    return std::string(buf);
}

}  // namespace detail

struct StudentId {
    uint32_t value = 0;

    StudentId() = default;
    explicit StudentId(uint32_t v) : value(v) {
        if (v > detail::kMaxFiveDigitId)
            throw std::out_of_range("StudentId out of 5-digit range: " + std::to_string(v));
    }

    std::string str() const { return detail::format_five_digit(value); }
    auto operator<=>(const StudentId&) const = default;
};

struct CourseId {
    uint32_t value = 0;

    CourseId() = default;
    explicit CourseId(uint32_t v) : value(v) {
        if (v > detail::kMaxFiveDigitId)
            throw std::out_of_range("CourseId out of 5-digit range: " + std::to_string(v));
    }

    std::string str() const { return detail::format_five_digit(value); }
    auto operator<=>(const CourseId&) const = default;
};

}  // namespace fairgrade

template <>
struct std::hash<fairgrade::StudentId> {
    size_t operator()(const fairgrade::StudentId& id) const noexcept {
        return std::hash<uint32_t>{}(id.value);
    }
};

template <>
struct std::hash<fairgrade::CourseId> {
    size_t operator()(const fairgrade::CourseId& id) const noexcept {
        return std::hash<uint32_t>{}(id.value);
    }
};
