#include "reference_8b10b.hpp"

#include <algorithm>

namespace c2c::testing {

namespace {

struct Pair {
    const char* minus;
    const char* plus;
};

constexpr Pair k5b6b[32] = {
    {"100111", "011000"}, {"011101", "100010"}, {"101101", "010010"}, {"110001", "110001"},
    {"110101", "001010"}, {"101001", "101001"}, {"011001", "011001"}, {"111000", "000111"},
    {"111001", "000110"}, {"100101", "100101"}, {"010101", "010101"}, {"110100", "110100"},
    {"001101", "001101"}, {"101100", "101100"}, {"011100", "011100"}, {"010111", "101000"},
    {"011011", "100100"}, {"100011", "100011"}, {"010011", "010011"}, {"110010", "110010"},
    {"001011", "001011"}, {"101010", "101010"}, {"011010", "011010"}, {"111010", "000101"},
    {"110011", "001100"}, {"100110", "100110"}, {"010110", "010110"}, {"110110", "001001"},
    {"001110", "001110"}, {"101110", "010001"}, {"011110", "100001"}, {"101011", "010100"},
};
constexpr Pair kK28{"001111", "110000"};

constexpr Pair k3b4b[8] = {
    {"1011", "0100"}, {"1001", "1001"}, {"0101", "0101"}, {"1100", "0011"},
    {"1101", "0010"}, {"1010", "1010"}, {"0110", "0110"}, {"1110", "0001"},
};
constexpr Pair kA7{"0111", "1000"};
constexpr Pair kK3b4b[8] = {
    {"1011", "0100"}, {"0110", "1001"}, {"1010", "0101"}, {"1100", "0011"},
    {"1101", "0010"}, {"0101", "1010"}, {"1001", "0110"}, {"0111", "1000"},
};

}  // namespace

int ones_minus_zeros(const std::string& bits) {
    const auto n1 = static_cast<int>(std::count(bits.begin(), bits.end(), '1'));
    return 2 * n1 - static_cast<int>(bits.size());
}

ReferenceCode reference_encode(std::uint8_t byte, bool is_control, bool rd_positive) {
    const int x = byte & 31;
    const int y = byte >> 5;
    if (is_control && !(x == 28 || (y == 7 && (x == 23 || x == 27 || x == 29 || x == 30)))) return {"", rd_positive};

    const Pair six = (is_control && x == 28) ? kK28 : k5b6b[x];
    const std::string s6 = rd_positive ? six.plus : six.minus;
    bool rd = rd_positive;
    if (ones_minus_zeros(s6) != 0) rd = ones_minus_zeros(s6) > 0;

    Pair four{};
    if (is_control) {
        four = kK3b4b[y];
    } else if (y == 7 && ((!rd && (x == 17 || x == 18 || x == 20)) || (rd && (x == 11 || x == 13 || x == 14)))) {
        four = kA7;
    } else {
        four = k3b4b[y];
    }
    const std::string s4 = rd ? four.plus : four.minus;
    if (ones_minus_zeros(s4) != 0) rd = ones_minus_zeros(s4) > 0;
    return {s6 + s4, rd};
}

}  // namespace c2c::testing
