#include "rangeforge/time.hpp"

#include <cstdio>

namespace rangeforge {

std::string format_duration(SimTime t) {
    const bool neg = t < 0;
    if (neg) t = -t;
    const std::int64_t ms = t % 1000;
    const std::int64_t s = (t / 1000) % 60;
    const std::int64_t m = (t / 60'000) % 60;
    const std::int64_t h = t / 3'600'000;

    char buf[64];
    if (h > 0) {
        std::snprintf(buf, sizeof(buf), "%s%lldh%02lldm%02lld.%03llds", neg ? "-" : "",
                      static_cast<long long>(h), static_cast<long long>(m),
                      static_cast<long long>(s), static_cast<long long>(ms));
    } else if (m > 0) {
        std::snprintf(buf, sizeof(buf), "%s%lldm%02lld.%03llds", neg ? "-" : "",
                      static_cast<long long>(m), static_cast<long long>(s),
                      static_cast<long long>(ms));
    } else {
        std::snprintf(buf, sizeof(buf), "%s%lld.%03llds", neg ? "-" : "",
                      static_cast<long long>(s), static_cast<long long>(ms));
    }
    return buf;
}

}  // namespace rangeforge
