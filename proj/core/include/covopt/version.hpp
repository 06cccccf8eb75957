#pragma once

namespace covopt {

inline constexpr const char* kVersion = "0.1.0";

}
