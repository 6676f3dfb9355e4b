#pragma once

// Published energy-per-bit grid (pJ/bit) over average bandwidth and buffer size.

#include <array>

namespace c2c::testdata {

inline constexpr std::array<double, 5> kGridBwMbps = {50, 100, 200, 400, 600};
inline constexpr std::array<double, 8> kGridBufferKb = {64, 32, 16, 8, 4, 2, 1, 0.5};

inline constexpr double kGridPj[5][8] = {
    {6.550681839, 6.56432373, 6.591147461, 6.644794922, 6.752089844, 6.966679688, 7.395859375, 8.25421875},
    {6.530911865, 6.54432373, 6.571147461, 6.624794922, 6.732089844, 6.946679688, 7.375859375, 8.23421875},
    {6.520911865, 6.53432373, 6.561147461, 6.614794922, 6.722089844, 6.936679688, 7.365859375, 8.22421875},
    {6.515911865, 6.52932373, 6.556147461, 6.609794922, 6.717089844, 6.931679688, 7.360859375, 8.21921875},
    {6.514245199, 6.527657064, 6.554480794, 6.608128255, 6.715423177, 6.930013021, 7.359192708, 8.217552083},
};

}  // namespace c2c::testdata
