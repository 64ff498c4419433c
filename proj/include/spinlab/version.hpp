#pragma once

namespace spinlab {

inline constexpr const char* kVersion = "spinlab 0.1.0";

}
