#pragma once

namespace meniscus {

inline constexpr const char* kVersion = "meniscus 0.1.0";

}  // namespace meniscus
