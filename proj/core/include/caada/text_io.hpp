#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace caada {

// Shortest decimal representation that round-trips the exact double.
// Used for every float written to CSV or checkpoint files so that
// save -> load -> save is byte-identical.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

// Strict parse of a full token; returns false on trailing garbage.
inline bool parse_double(std::string_view text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

inline bool parse_long(std::string_view text, long& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

}  // namespace caada
