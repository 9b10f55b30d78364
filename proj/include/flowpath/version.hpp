#pragma once

namespace flowpath {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace flowpath
