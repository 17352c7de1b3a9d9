#pragma once

#include <cstdint>
#include <string>

namespace rangeforge {

/// Simulated time in milliseconds since run start. The engine never reads the
/// wall clock; every timestamp and duration in a journal derives from this
/// type, which keeps journals byte-identical across reruns and platforms.
using SimTime = std::int64_t;

constexpr SimTime seconds(std::int64_t s) { return s * 1000; }
constexpr SimTime minutes(std::int64_t m) { return m * 60'000; }
constexpr SimTime hours(std::int64_t h) { return h * 3'600'000; }

constexpr double to_seconds(SimTime t) { return static_cast<double>(t) / 1000.0; }
constexpr double to_hours(SimTime t) { return static_cast<double>(t) / 3'600'000.0; }

/// "4h03m07.250s" style rendering for reports and logs.
std::string format_duration(SimTime t);

}  // namespace rangeforge
