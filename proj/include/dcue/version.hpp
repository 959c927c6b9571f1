#pragma once

namespace dcue {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dcue
