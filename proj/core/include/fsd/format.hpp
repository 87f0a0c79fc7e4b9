#pragma once

#include <string>

namespace fsd {

/// Shortest round-trip decimal; integral values keep a ".0" ("3.0").
std::string format_real(double v);

}  // namespace fsd
