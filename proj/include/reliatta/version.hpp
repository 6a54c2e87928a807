#pragma once

namespace reliatta {

inline constexpr const char* kVersion = "reliatta 0.1.0";

}  // namespace reliatta
