#pragma once

namespace sebf {
inline constexpr const char* kVersion = "0.1.0";
}
