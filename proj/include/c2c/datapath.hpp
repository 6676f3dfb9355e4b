#pragma once

// Cycle-level 40:1 DDR serializer, 2:40 deserializer and the RX timing
// synchronizer. One step = one fast-clock (Clk) cycle = two wire bits; the
// even bit rides the rising edge and goes first.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace c2c {

struct BitPair {
    bool even = false;
    bool odd = false;
    friend bool operator==(BitPair, BitPair) = default;
};

inline constexpr int kPairsPerFlit = 20;
inline constexpr int kBitsPerGroup = 8;
inline constexpr int kGroups = 5;

struct Underflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Serializer {
public:
    struct Output {
        BitPair pair;
        int counter;         // group being emitted, 0..4
        int group_index;     // index of the odd bit inside the group, 1..7
        bool flit_complete;  // this pair carried bit 39
    };

    /// Queues a flit; it starts as soon as the current one completes.
    void load(std::uint64_t flit_bits);
    bool has_pending() const { return pending_.has_value(); }
    /// True when no flit is in progress (the next step starts a new one).
    bool at_boundary() const { return !current_; }

    Output step();

    int counter() const { return bit_index_ / kBitsPerGroup; }
    std::uint64_t bits_emitted() const { return total_bits_; }

private:
    std::optional<std::uint64_t> current_;
    std::optional<std::uint64_t> pending_;
    int bit_index_ = 0;
    std::uint64_t total_bits_ = 0;
};

class Deserializer {
public:
    /// Consumes one pair; returns the 40-bit word on the 20th pair.
    std::optional<std::uint64_t> step(BitPair pair);
    /// Drops a partial word and restarts at counter 0.
    void reset();

    int counter() const { return pairs_ / 4; }
    int pairs_collected() const { return pairs_; }

private:
    std::uint64_t shift_ = 0;
    int pairs_ = 0;
};

/// Realigns an odd-shifted pair stream: with shift set, each output pair is
/// (previous odd, current even). The first output after construction uses
/// `prefill` as the previous odd bit; afterwards it is the last odd bit seen,
/// whether or not shift was set, so toggling shift mid-stream is seamless.
class TimingSynchronizer {
public:
    explicit TimingSynchronizer(bool prefill = false) : prev_odd_(prefill) {}

    BitPair step(BitPair in);
    void set_shift(bool shift) { shift_ = shift; }
    bool shift() const { return shift_; }

private:
    bool shift_ = false;
    bool prev_odd_;
};

std::vector<BitPair> apply_shift(std::span<const BitPair> pairs, bool shift, bool prefill = false);

/// Splits 40 flit bits into the 20 pairs the serializer emits.
std::vector<BitPair> flit_pairs(std::uint64_t flit_bits);

}  // namespace c2c
