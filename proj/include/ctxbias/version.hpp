#pragma once

namespace ctxbias {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ctxbias
