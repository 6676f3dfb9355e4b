#pragma once

// Link controllers: TX flit-selection FSM, RX sequence detector and the RX
// controller that gates the deserializer and decoders.

#include <cstdint>
#include <span>
#include <vector>

#include "c2c/codec.hpp"
#include "c2c/datapath.hpp"

namespace c2c {

// ---------------------------------------------------------------------------
// TX controller

enum class TxState : std::uint8_t { Idle, WarmUp, StartHeader, DataComm, StopHeader };
const char* to_string(TxState s);

enum class FlitSelect : std::uint8_t { None, Training, Start, Data, Stop };
const char* to_string(FlitSelect s);

struct HandshakeSignals {
    bool valid = false;  // TX FIFO has a word
    bool ready = true;   // RX FIFO can accept a word
    bool warm_en = false;
    bool comm_en = false;
};

struct TxInputs {
    HandshakeSignals hs;
    /// Serializer counter value, 0..4.
    int counter_value = 0;
    /// The serializer finished a flit (or is empty) and wants the next one.
    bool flit_boundary = true;
};

struct TxDecision {
    TxState next;
    FlitSelect flit_select;  // flit to load for the next 20-cycle slot
    bool encoder_enable;     // a data word is consumed from the FIFO
};

/// One evaluation of the TX FSM. Off a flit boundary the state is held and
/// nothing is selected: the flit multiplexer only updates every 20 cycles.
TxDecision tx_fsm_step(TxState state, const TxInputs& in);

/// The edges the TX FSM may take.
bool is_tx_edge(TxState from, TxState to);

// ---------------------------------------------------------------------------
// Sequence detector

enum class SeqDetState : std::uint8_t {
    Start,
    Check1,
    Check2,
    Check3,
    Check4,
    DataComm,
    StopCheck1,
    StopCheck2,
    StopCheck3,
    StopCheck4,
};
const char* to_string(SeqDetState s);

struct DetectorEvents {
    bool start_detected = false;
    bool stop_detected = false;
    bool shift = false;  // alignment of the detected pattern
};

/// Watches raw comparator pairs for the start pattern (outside DataComm) and
/// the stop pattern (inside DataComm), at both even and odd alignment.
///
/// The state names follow the pair-by-pair progress through the pattern:
/// Check1..Check3 after one to three aligned pairs matched, and on the odd
/// path one more (Check4) because the pattern straddles five pairs there.
/// Progress is tracked with a bit window so overlapping prefixes are never
/// lost.
class SequenceDetector {
public:
    explicit SequenceDetector(FramingPatterns patterns = {}) : patterns_(patterns) {}

    DetectorEvents step(BitPair pair);
    /// Back to Start with an empty window.
    void reset();

    SeqDetState state() const { return state_; }
    bool shift() const { return shift_; }
    bool in_data_comm() const { return data_comm_; }

private:
    SeqDetState progress_label() const;

    FramingPatterns patterns_;
    std::uint32_t window_ = 0;  // bit 0 = newest wire bit
    int bits_seen_ = 0;
    bool data_comm_ = false;
    bool shift_ = false;
    SeqDetState state_ = SeqDetState::Start;
};

bool is_detector_edge(SeqDetState from, SeqDetState to);

// ---------------------------------------------------------------------------
// RX controller

struct RxControllerInputs {
    DetectorEvents events;
    bool word_ready = false;  // deserializer completed a 40-bit word this cycle
    bool warm_en = false;
    bool comm_en = false;
};

struct RxEnables {
    bool cdr_en = false;
    bool detector_en = false;
    bool deserializer_en = false;
    bool decoder_en = false;
    bool valid_out = false;  // decoded word presented to the FIFO this cycle
    bool idle() const { return !cdr_en && !detector_en && !deserializer_en && !decoder_en; }
};

/// Pair-rate RX controller. After a start detection the rest of the start
/// flit (16 pairs) is let through before the deserializer starts; decoded
/// words appear one slow-clock cycle (4 pairs) after the deserializer
/// completes them.
class RxController {
public:
    static constexpr int kDecoderLatency = 4;
    static constexpr int kStartFlitTail = kPairsPerFlit - 4;

    RxEnables step(const RxControllerInputs& in);
    bool receiving() const { return receiving_; }

private:
    bool receiving_ = false;
    int skip_ = 0;
    int valid_countdown_ = -1;
};

}  // namespace c2c
