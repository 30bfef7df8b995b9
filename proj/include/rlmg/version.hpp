#pragma once

namespace rlmg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rlmg
