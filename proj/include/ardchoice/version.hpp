#pragma once

namespace ardchoice {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ardchoice
