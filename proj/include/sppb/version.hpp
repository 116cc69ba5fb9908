#pragma once

namespace sppb {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kConfigVersion = 1;

}  // namespace sppb
