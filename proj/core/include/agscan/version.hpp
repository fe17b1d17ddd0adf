#pragma once

namespace agscan {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace agscan
