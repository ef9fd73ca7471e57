#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace aodret {

// Shortest decimal form that parses back to the same double (via to_chars),
// so every text format round-trips byte for byte.
std::string format_double(double v);
double parse_double(std::string_view s); // throws std::runtime_error on junk

long long parse_int(std::string_view s);

// FNV-1a 64-bit, used for file checksum lines.
std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t v);

// Reads one line; throws std::runtime_error mentioning `what` on EOF.
std::string expect_line(std::istream& in, const char* what);

} // namespace aodret
