#pragma once

#include <charconv>
#include <string>

namespace rrl {

/// Shortest round-trip decimal form, locale-independent (std::to_chars), so
/// emitted CSV/JSON artifacts are byte-stable across runs and thread counts.
inline std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

} // namespace rrl
