#include "c2c/codec.hpp"

#include <algorithm>
#include <bit>
#include <sstream>
#include <unordered_map>

namespace c2c {

namespace {

// Sub-block tables in wire order, written as strings so they can be read
// against the published tables. Each entry is the RD- form; the RD+ form is
// the complement when the sub-block is unbalanced.
constexpr const char* kSixBit[32] = {
    "100111", "011101", "101101", "110001", "110101", "101001", "011001", "111000",
    "111001", "100101", "010101", "110100", "001101", "101100", "011100", "010111",
    "011011", "100011", "010011", "110010", "001011", "101010", "011010", "111010",
    "110011", "100110", "010110", "110110", "001110", "101110", "011110", "101011",
};
constexpr const char* kK28SixBit = "001111";

constexpr const char* kFourBitData[8] = {"1011", "1001", "0101", "1100", "1101", "1010", "0110", "1110"};
constexpr const char* kFourBitAlt7 = "0111";
constexpr const char* kFourBitControl[8] = {"1011", "0110", "1010", "1100", "1101", "0101", "1001", "0111"};

std::uint16_t parse_bits(const char* s) {
    std::uint16_t v = 0;
    for (int i = 0; s[i] != '\0'; ++i) {
        if (s[i] == '1') v |= static_cast<std::uint16_t>(1u << i);
    }
    return v;
}

int ones(std::uint16_t v) { return std::popcount(static_cast<unsigned>(v)); }

// Selects the sub-block for the current disparity. Balanced sub-blocks that
// still come in two forms (111000/000111, 1100/0011) alternate with RD too.
std::uint16_t oriented(const char* rd_minus_form, int width, RunningDisparity rd) {
    std::uint16_t v = parse_bits(rd_minus_form);
    const std::uint16_t mask = static_cast<std::uint16_t>((1u << width) - 1u);
    const bool unbalanced = ones(v) * 2 != width;
    const bool alternating = (width == 6 && v == parse_bits("111000")) || (width == 4 && v == parse_bits("1100"));
    if (rd == RunningDisparity::Positive && (unbalanced || alternating)) v = static_cast<std::uint16_t>(~v & mask);
    return v;
}

RunningDisparity after(std::uint16_t block, int width, RunningDisparity rd) {
    return ones(block) * 2 == width ? rd : flip(rd);
}

EncodeResult encode_unchecked(SymbolClass sym, RunningDisparity rd) {
    const int x = sym.payload & 0x1F;
    const int y = sym.payload >> 5;

    const char* six = (sym.is_control && x == 28) ? kK28SixBit : kSixBit[x];
    const std::uint16_t abcdei = oriented(six, 6, rd);
    const RunningDisparity mid = after(abcdei, 6, rd);

    const char* four = nullptr;
    if (sym.is_control) {
        four = kFourBitControl[y];
    } else if (y == 7) {
        const bool alt = (mid == RunningDisparity::Negative && (x == 17 || x == 18 || x == 20)) ||
                         (mid == RunningDisparity::Positive && (x == 11 || x == 13 || x == 14));
        four = alt ? kFourBitAlt7 : kFourBitData[7];
    } else {
        four = kFourBitData[y];
    }
    std::uint16_t fghj = oriented(four, 4, mid);
    // K.x.y 4b blocks are listed in their RD- form and all complement at RD+.
    if (sym.is_control && mid == RunningDisparity::Positive) fghj = static_cast<std::uint16_t>(~parse_bits(four) & 0xF);
    const RunningDisparity out = after(fghj, 4, mid);
    return {Code10{static_cast<std::uint16_t>(abcdei | (fghj << 6))}, out};
}

struct TableKey {
    std::uint16_t code;
    RunningDisparity rd;
    friend bool operator==(TableKey, TableKey) = default;
};
struct TableKeyHash {
    std::size_t operator()(TableKey k) const { return (static_cast<std::size_t>(k.code) << 1) | static_cast<std::size_t>(k.rd); }
};

const std::unordered_map<TableKey, DecodeResult, TableKeyHash>& decode_table() {
    static const auto table = [] {
        std::unordered_map<TableKey, DecodeResult, TableKeyHash> t;
        for (const auto& row : code_table()) {
            t.emplace(TableKey{row.code.bits, row.rd_in}, DecodeResult{{row.byte, row.is_control}, row.rd_out});
        }
        return t;
    }();
    return table;
}

std::string hex10(std::uint16_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

}  // namespace

int Code10::disparity() const { return 2 * ones(bits & 0x3FF) - 10; }

const std::vector<std::uint8_t>& supported_control_bytes() {
    static const std::vector<std::uint8_t> k = [] {
        std::vector<std::uint8_t> v;
        for (int y = 0; y < 8; ++y) v.push_back(symbol_byte(28, y));
        for (int x : {23, 27, 29, 30}) v.push_back(symbol_byte(x, 7));
        return v;
    }();
    return k;
}

bool is_supported_control(std::uint8_t payload) {
    const auto& k = supported_control_bytes();
    return std::find(k.begin(), k.end(), payload) != k.end();
}

EncodeResult encode_symbol(SymbolClass sym, RunningDisparity rd) {
    if (sym.is_control && !is_supported_control(sym.payload)) {
        throw UnsupportedControlSymbol("unsupported control symbol K" + std::to_string(sym.payload & 0x1F) + "." +
                                       std::to_string(sym.payload >> 5));
    }
    return encode_unchecked(sym, rd);
}

DecodeResult decode_symbol(Code10 code, RunningDisparity rd) {
    const auto& table = decode_table();
    if (auto it = table.find({code.bits, rd}); it != table.end()) return it->second;
    if (table.contains({code.bits, flip(rd)})) {
        throw DisparityError("code " + hex10(code.bits) + " not legal at the current running disparity");
    }
    throw InvalidCode("code " + hex10(code.bits) + " is not an 8b/10b code");
}

std::vector<CodeTableRow> code_table() {
    std::vector<CodeTableRow> rows;
    rows.reserve(2 * (256 + supported_control_bytes().size()));
    for (int b = 0; b < 256; ++b) {
        for (auto rd : {RunningDisparity::Negative, RunningDisparity::Positive}) {
            const auto e = encode_unchecked(data_symbol(static_cast<std::uint8_t>(b)), rd);
            rows.push_back({static_cast<std::uint8_t>(b), false, rd, e.code, e.rd});
        }
    }
    for (auto k : supported_control_bytes()) {
        for (auto rd : {RunningDisparity::Negative, RunningDisparity::Positive}) {
            const auto e = encode_unchecked(control_symbol(k), rd);
            rows.push_back({k, true, rd, e.code, e.rd});
        }
    }
    return rows;
}

std::string code_table_csv() {
    std::ostringstream os;
    os << "byte,is_control,rd_in,code10,rd_out\n";
    auto rd_str = [](RunningDisparity r) { return r == RunningDisparity::Negative ? "-" : "+"; };
    for (const auto& r : code_table()) {
        std::string wire;
        for (int i = 0; i < 10; ++i) wire += r.code.bit(i) ? '1' : '0';
        os << int(r.byte) << ',' << (r.is_control ? 1 : 0) << ',' << rd_str(r.rd_in) << ',' << wire << ','
           << rd_str(r.rd_out) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------

const char* to_string(FlitKind k) {
    switch (k) {
        case FlitKind::Data: return "data";
        case FlitKind::Start: return "start";
        case FlitKind::Stop: return "stop";
        case FlitKind::Training: return "training";
    }
    return "?";
}

std::uint64_t Flit40::bits() const {
    std::uint64_t v = 0;
    for (int i = 0; i < kLanes; ++i) v |= static_cast<std::uint64_t>(lanes[i] & 0x3FF) << (10 * i);
    return v;
}

std::array<std::uint16_t, kLanes> Flit40::unpack(std::uint64_t bits) {
    std::array<std::uint16_t, kLanes> l{};
    for (int i = 0; i < kLanes; ++i) l[i] = static_cast<std::uint16_t>((bits >> (10 * i)) & 0x3FF);
    return l;
}

namespace {

// Lane 0 = the eight pattern bits then "00"; lane 1 restores the balance
// with the missing ones spread out; lanes 2 and 3 are D21.5.
std::uint64_t framing_bits(std::uint8_t pattern) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        if ((pattern >> (7 - i)) & 1u) v |= 1ull << i;
    }
    const int missing = 10 - std::popcount(static_cast<unsigned>(pattern));
    if (missing > 0) {
        for (int j = 0; j < missing; ++j) {
            const int pos = std::min(9, (2 * j + 1) * 10 / (2 * missing));
            v |= 1ull << (10 + pos);
        }
    }
    const std::uint64_t d21_5 = parse_bits("1010101010");
    v |= d21_5 << 20;
    v |= d21_5 << 30;
    return v;
}

}  // namespace

std::uint64_t start_flit_bits(const FramingPatterns& p) { return framing_bits(p.start); }
std::uint64_t stop_flit_bits(const FramingPatterns& p) { return framing_bits(p.stop); }

std::uint64_t training_flit_bits() {
    const std::uint64_t d21_5 = parse_bits("1010101010");
    return d21_5 | (d21_5 << 10) | (d21_5 << 20) | (d21_5 << 30);
}

FlitEncodeResult encode_flit(FlitKind kind, std::optional<std::uint32_t> word, const LaneDisparity& rd,
                             const FramingPatterns& patterns) {
    Flit40 f;
    f.kind = kind;
    if (kind == FlitKind::Data) {
        if (!word) throw std::invalid_argument("data flit requires a word");
        RunningDisparity cur = rd[kLanes - 1];
        for (int lane = 0; lane < kLanes; ++lane) {
            const auto byte = static_cast<std::uint8_t>((*word >> (8 * lane)) & 0xFF);
            const auto e = encode_unchecked(data_symbol(byte), cur);
            f.lanes[lane] = e.code.bits;
            f.lane_rd[lane] = cur = e.rd;
        }
        return {f, f.lane_rd};
    }
    if (word) throw std::invalid_argument(std::string(to_string(kind)) + " flit takes no word");
    std::uint64_t bits = 0;
    switch (kind) {
        case FlitKind::Start: bits = start_flit_bits(patterns); break;
        case FlitKind::Stop: bits = stop_flit_bits(patterns); break;
        default: bits = training_flit_bits(); break;
    }
    f.lanes = Flit40::unpack(bits);
    f.lane_rd.fill(rd[kLanes - 1]);
    return {f, f.lane_rd};
}

FlitDecodeResult decode_flit_bits(std::uint64_t bits, const LaneDisparity& rd, const FramingPatterns& patterns) {
    const RunningDisparity carry = rd[kLanes - 1];
    LaneDisparity same;
    same.fill(carry);
    if (bits == start_flit_bits(patterns)) return {FlitKind::Start, std::nullopt, same};
    if (bits == stop_flit_bits(patterns)) return {FlitKind::Stop, std::nullopt, same};
    if (bits == training_flit_bits()) return {FlitKind::Training, std::nullopt, same};

    const auto lanes = Flit40::unpack(bits);
    LaneDisparity out{};
    RunningDisparity cur = carry;
    std::uint32_t word = 0;
    for (int lane = 0; lane < kLanes; ++lane) {
        DecodeResult d;
        try {
            d = decode_symbol(Code10{lanes[lane]}, cur);
        } catch (const DisparityError& e) {
            throw DisparityError("lane " + std::to_string(lane) + ": " + e.what(), lane);
        } catch (const InvalidCode& e) {
            throw InvalidCode("lane " + std::to_string(lane) + ": " + e.what(), lane);
        }
        if (d.symbol.is_control) {
            throw InvalidCode("lane " + std::to_string(lane) + ": control symbol inside a data flit", lane);
        }
        word |= static_cast<std::uint32_t>(d.symbol.payload) << (8 * lane);
        out[lane] = cur = d.rd;
    }
    return {FlitKind::Data, word, out};
}

FlitDecodeResult decode_flit(const Flit40& flit, const LaneDisparity& rd, const FramingPatterns& patterns) {
    return decode_flit_bits(flit.bits(), rd, patterns);
}

}  // namespace c2c
