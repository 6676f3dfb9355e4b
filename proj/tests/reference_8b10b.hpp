#pragma once

// Test-only 8b/10b oracle built from the published RD-/RD+ columns written
// out explicitly, with disparity decided by counting ones.

#include <cstdint>
#include <string>

namespace c2c::testing {

struct ReferenceCode {
    std::string wire;  // "abcdeifghj"
    bool rd_positive_after;
};

/// Returns an empty wire string for control bytes outside the K set.
ReferenceCode reference_encode(std::uint8_t byte, bool is_control, bool rd_positive);

int ones_minus_zeros(const std::string& bits);

}  // namespace c2c::testing
