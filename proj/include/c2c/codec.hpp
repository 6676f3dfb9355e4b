#pragma once

// 8b/10b line coding and 40-bit flit framing.
//
// A Code10 stores its ten wire bits with bit 0 = 'a' (first on the wire),
// bits 0..5 = abcdei and bits 6..9 = fghj. A flit is four such lanes sent
// lane 0 first, so flit bit k is lane k/10, code bit k%10.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace c2c {

enum class RunningDisparity : std::uint8_t { Negative, Positive };

constexpr RunningDisparity flip(RunningDisparity rd) {
    return rd == RunningDisparity::Negative ? RunningDisparity::Positive : RunningDisparity::Negative;
}

struct Code10 {
    std::uint16_t bits = 0;  // 10 significant bits

    /// Ones minus zeros over the ten bits: -2, 0 or +2 for a valid code.
    int disparity() const;
    bool bit(int i) const { return (bits >> i) & 1u; }
    friend bool operator==(Code10, Code10) = default;
};

struct SymbolClass {
    std::uint8_t payload = 0;
    bool is_control = false;
    friend bool operator==(SymbolClass, SymbolClass) = default;
};

constexpr SymbolClass data_symbol(std::uint8_t b) { return {b, false}; }
constexpr SymbolClass control_symbol(std::uint8_t b) { return {b, true}; }

/// Builds the byte value of Dx.y / Kx.y: low five bits x, high three bits y.
constexpr std::uint8_t symbol_byte(int x, int y) {
    return static_cast<std::uint8_t>((y << 5) | x);
}

inline constexpr std::uint8_t kK28_5 = symbol_byte(28, 5);
inline constexpr std::uint8_t kK27_7 = symbol_byte(27, 7);
inline constexpr std::uint8_t kK29_7 = symbol_byte(29, 7);

/// K28.0-K28.7, K23.7, K27.7, K29.7, K30.7.
const std::vector<std::uint8_t>& supported_control_bytes();
bool is_supported_control(std::uint8_t payload);

struct CodecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedControlSymbol : CodecError {
    using CodecError::CodecError;
};
struct InvalidCode : CodecError {
    InvalidCode(const std::string& what, int lane = -1) : CodecError(what), lane(lane) {}
    int lane;
};
struct DisparityError : CodecError {
    DisparityError(const std::string& what, int lane = -1) : CodecError(what), lane(lane) {}
    int lane;
};

struct EncodeResult {
    Code10 code;
    RunningDisparity rd;
};
struct DecodeResult {
    SymbolClass symbol;
    RunningDisparity rd;
};

EncodeResult encode_symbol(SymbolClass sym, RunningDisparity rd);
DecodeResult decode_symbol(Code10 code, RunningDisparity rd);

/// One row of the exported table: `byte,is_control,rd_in,code10,rd_out`.
struct CodeTableRow {
    std::uint8_t byte;
    bool is_control;
    RunningDisparity rd_in;
    Code10 code;
    RunningDisparity rd_out;
};
std::vector<CodeTableRow> code_table();
std::string code_table_csv();

// ---------------------------------------------------------------------------
// Flits

inline constexpr int kFlitBits = 40;
inline constexpr int kLanes = 4;

enum class FlitKind : std::uint8_t { Data, Start, Stop, Training };
const char* to_string(FlitKind k);

/// Eight-bit framing patterns, written in wire order: the most significant
/// bit of the byte is the first bit on the wire ("11011111" -> 0xDF).
struct FramingPatterns {
    std::uint8_t start = 0xDF;
    std::uint8_t stop = 0xBF;
};

/// Per-lane running disparities, index = lane.
using LaneDisparity = std::array<RunningDisparity, kLanes>;

constexpr LaneDisparity all_negative() {
    return {RunningDisparity::Negative, RunningDisparity::Negative, RunningDisparity::Negative,
            RunningDisparity::Negative};
}

struct Flit40 {
    std::array<std::uint16_t, kLanes> lanes{};  // 10-bit words
    FlitKind kind = FlitKind::Data;
    LaneDisparity lane_rd = all_negative();  // disparity after each lane

    /// Packed wire bits, bit k = k-th bit on the wire.
    std::uint64_t bits() const;
    static std::array<std::uint16_t, kLanes> unpack(std::uint64_t bits);
    bool bit(int k) const { return (bits() >> k) & 1u; }
    friend bool operator==(const Flit40&, const Flit40&) = default;
};

struct FlitEncodeResult {
    Flit40 flit;
    LaneDisparity rd;
};
struct FlitDecodeResult {
    FlitKind kind;
    std::optional<std::uint32_t> word;
    LaneDisparity rd;
};

/// Encodes a flit. Data lanes are encoded in wire order with the disparity
/// chained from lane to lane: lane i starts from the disparity left by lane
/// i-1, and lane 0 from `rd[3]` (the last lane of the previous flit). The
/// returned array is the disparity after each lane. Framing flits leave the
/// disparity unchanged.
FlitEncodeResult encode_flit(FlitKind kind, std::optional<std::uint32_t> word, const LaneDisparity& rd,
                             const FramingPatterns& patterns = {});

/// Inverse of encode_flit. Errors carry the offending lane index.
FlitDecodeResult decode_flit(const Flit40& flit, const LaneDisparity& rd, const FramingPatterns& patterns = {});
/// Same, from 40 raw wire bits as produced by the deserializer.
FlitDecodeResult decode_flit_bits(std::uint64_t bits, const LaneDisparity& rd,
                                  const FramingPatterns& patterns = {});

/// The raw 40-bit framing words. They begin with the 8-bit pattern and
/// carry 20 ones overall.
std::uint64_t start_flit_bits(const FramingPatterns& p = {});
std::uint64_t stop_flit_bits(const FramingPatterns& p = {});
/// Four lanes of D21.5 (1010101010): maximal transition density, neutral.
std::uint64_t training_flit_bits();

}  // namespace c2c
