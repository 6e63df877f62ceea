#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fairgrade {

// The 17 PSA administrative regions plus ABROAD. The enumeration order is
// load-bearing: majority-location ties resolve to the first-listed code.
enum class RegionCode : uint8_t {
    NCR,
    CAR,
    R01,
    R02,
    R03,
    R04A,
    R04B,
    R05,
    R06,
    R07,
    R08,
    R09,
    R10,
    R11,
    R12,
    R13,
    BARMM,
    ABROAD,
};

constexpr int kNumRegionCodes = 18;

// Island-group clusters used for the fairness audit, in report column order.
enum class RegionCluster : uint8_t {
    NCR,
    Luzon,
    Mindanao,
    Visayas,
    Abroad,
};

constexpr int kNumClusters = 5;

constexpr std::array<RegionCode, kNumRegionCodes> all_region_codes() {
    return {RegionCode::NCR,  RegionCode::CAR,  RegionCode::R01,  RegionCode::R02,
            RegionCode::R03,  RegionCode::R04A, RegionCode::R04B, RegionCode::R05,
            RegionCode::R06,  RegionCode::R07,  RegionCode::R08,  RegionCode::R09,
            RegionCode::R10,  RegionCode::R11,  RegionCode::R12,  RegionCode::R13,
            RegionCode::BARMM, RegionCode::ABROAD};
}

constexpr std::array<RegionCluster, kNumClusters> all_clusters() {
    return {RegionCluster::NCR, RegionCluster::Luzon, RegionCluster::Mindanao,
            RegionCluster::Visayas, RegionCluster::Abroad};
}

// Total mapping from region to island-group cluster.
constexpr RegionCluster cluster_region(RegionCode code) {
    switch (code) {
        case RegionCode::NCR:
            return RegionCluster::NCR;
        case RegionCode::CAR:
        case RegionCode::R01:
        case RegionCode::R02:
        case RegionCode::R03:
        case RegionCode::R04A:
        case RegionCode::R04B:
        case RegionCode::R05:
            return RegionCluster::Luzon;
        case RegionCode::R06:
        case RegionCode::R07:
        case RegionCode::R08:
            return RegionCluster::Visayas;
        case RegionCode::R09:
        case RegionCode::R10:
        case RegionCode::R11:
        case RegionCode::R12:
        case RegionCode::R13:
        case RegionCode::BARMM:
            return RegionCluster::Mindanao;
        case RegionCode::ABROAD:
            return RegionCluster::Abroad;
    }
    return RegionCluster::Abroad;  // unreachable
}

std::string_view region_code_name(RegionCode code);
std::optional<RegionCode> parse_region_code(std::string_view text);

std::string_view cluster_name(RegionCluster cluster);
std::optional<RegionCluster> parse_cluster(std::string_view text);

}  // namespace fairgrade
