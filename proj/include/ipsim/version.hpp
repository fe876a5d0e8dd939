#pragma once

namespace ipsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ipsim
