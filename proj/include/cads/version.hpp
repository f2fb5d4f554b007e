#pragma once

namespace cads {

inline constexpr const char* kToolName = "cads";
inline constexpr const char* kVersion = "1.0.0";

}  // namespace cads
