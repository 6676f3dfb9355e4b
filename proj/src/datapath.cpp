#include "c2c/datapath.hpp"

namespace c2c {

void Serializer::load(std::uint64_t flit_bits) {
    if (!current_) {
        current_ = flit_bits;
        bit_index_ = 0;
    } else {
        pending_ = flit_bits;
    }
}

Serializer::Output Serializer::step() {
    if (!current_) {
        if (!pending_) throw Underflow("serializer stepped with no flit loaded");
        current_ = pending_;
        pending_.reset();
        bit_index_ = 0;
    }
    const std::uint64_t f = *current_;
    Output out;
    out.counter = bit_index_ / kBitsPerGroup;
    out.pair = {((f >> bit_index_) & 1u) != 0, ((f >> (bit_index_ + 1)) & 1u) != 0};
    out.group_index = (bit_index_ + 1) % kBitsPerGroup;
    bit_index_ += 2;
    total_bits_ += 2;
    out.flit_complete = bit_index_ == 40;
    if (out.flit_complete) {
        current_ = pending_;
        pending_.reset();
        bit_index_ = 0;
    }
    return out;
}

std::optional<std::uint64_t> Deserializer::step(BitPair pair) {
    const int base = 2 * pairs_;
    shift_ |= static_cast<std::uint64_t>(pair.even) << base;
    shift_ |= static_cast<std::uint64_t>(pair.odd) << (base + 1);
    if (++pairs_ < kPairsPerFlit) return std::nullopt;
    const auto word = shift_;
    reset();
    return word;
}

void Deserializer::reset() {
    shift_ = 0;
    pairs_ = 0;
}

BitPair TimingSynchronizer::step(BitPair in) {
    BitPair out = shift_ ? BitPair{prev_odd_, in.even} : in;
    prev_odd_ = in.odd;
    return out;
}

std::vector<BitPair> apply_shift(std::span<const BitPair> pairs, bool shift, bool prefill) {
    TimingSynchronizer sync(prefill);
    sync.set_shift(shift);
    std::vector<BitPair> out;
    out.reserve(pairs.size());
    for (auto p : pairs) out.push_back(sync.step(p));
    return out;
}

std::vector<BitPair> flit_pairs(std::uint64_t flit_bits) {
    std::vector<BitPair> out(kPairsPerFlit);
    for (int i = 0; i < kPairsPerFlit; ++i) {
        out[i] = {((flit_bits >> (2 * i)) & 1u) != 0, ((flit_bits >> (2 * i + 1)) & 1u) != 0};
    }
    return out;
}

}  // namespace c2c
