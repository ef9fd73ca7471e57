#pragma once

namespace aodret {
inline constexpr const char* kVersion = "0.1.0";
}
