#pragma once

namespace ncdoa {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ncdoa
