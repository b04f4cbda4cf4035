#pragma once

namespace swiptmac {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace swiptmac
