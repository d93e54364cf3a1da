#pragma once

namespace uldyn {
inline constexpr const char* kVersion = "0.1.0";
}
