#pragma once

namespace conckit {

inline constexpr const char* version = "0.1.0";

}  // namespace conckit
