#include "c2c/control.hpp"

#include <algorithm>

namespace c2c {

const char* to_string(TxState s) {
    switch (s) {
        case TxState::Idle: return "idle";
        case TxState::WarmUp: return "warm-up";
        case TxState::StartHeader: return "start-header";
        case TxState::DataComm: return "data-comm";
        case TxState::StopHeader: return "stop-header";
    }
    return "?";
}

const char* to_string(FlitSelect s) {
    switch (s) {
        case FlitSelect::None: return "none";
        case FlitSelect::Training: return "training";
        case FlitSelect::Start: return "start";
        case FlitSelect::Data: return "data";
        case FlitSelect::Stop: return "stop";
    }
    return "?";
}

TxDecision tx_fsm_step(TxState state, const TxInputs& in) {
    if (!in.flit_boundary) return {state, FlitSelect::None, false};
    const auto& hs = in.hs;
    switch (state) {
        case TxState::Idle:
            if (hs.warm_en) return {TxState::WarmUp, FlitSelect::Training, false};
            return {TxState::Idle, FlitSelect::None, false};
        case TxState::WarmUp:
            if (hs.comm_en && hs.valid) return {TxState::StartHeader, FlitSelect::Start, false};
            if (!hs.warm_en) return {TxState::Idle, FlitSelect::None, false};
            return {TxState::WarmUp, FlitSelect::Training, false};
        case TxState::StartHeader:
        case TxState::DataComm:
            if (hs.valid) return {TxState::DataComm, FlitSelect::Data, true};
            return {TxState::StopHeader, FlitSelect::Stop, false};
        case TxState::StopHeader:
            return {TxState::Idle, FlitSelect::None, false};
    }
    return {TxState::Idle, FlitSelect::None, false};
}

bool is_tx_edge(TxState from, TxState to) {
    using S = TxState;
    if (from == to) return from != S::StartHeader && from != S::StopHeader;
    switch (from) {
        case S::Idle: return to == S::WarmUp;
        case S::WarmUp: return to == S::StartHeader || to == S::Idle;
        case S::StartHeader: return to == S::DataComm || to == S::StopHeader;
        case S::DataComm: return to == S::StopHeader;
        case S::StopHeader: return to == S::Idle;
    }
    return false;
}

// ---------------------------------------------------------------------------

const char* to_string(SeqDetState s) {
    switch (s) {
        case SeqDetState::Start: return "start";
        case SeqDetState::Check1: return "check1";
        case SeqDetState::Check2: return "check2";
        case SeqDetState::Check3: return "check3";
        case SeqDetState::Check4: return "check4";
        case SeqDetState::DataComm: return "data-comm";
        case SeqDetState::StopCheck1: return "stop-check1";
        case SeqDetState::StopCheck2: return "stop-check2";
        case SeqDetState::StopCheck3: return "stop-check3";
        case SeqDetState::StopCheck4: return "stop-check4";
    }
    return "?";
}

namespace {

// First `n` pattern bits in wire order, newest-last, as a window value.
std::uint32_t pattern_prefix(std::uint8_t pattern, int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | ((pattern >> (7 - i)) & 1u);
    return v;
}

bool window_ends_with(std::uint32_t window, int bits_seen, int skip_newest, std::uint8_t pattern, int n) {
    if (bits_seen < n + skip_newest) return false;
    const std::uint32_t mask = (1u << n) - 1u;
    return ((window >> skip_newest) & mask) == pattern_prefix(pattern, n);
}

}  // namespace

SeqDetState SequenceDetector::progress_label() const {
    const std::uint8_t p = data_comm_ ? patterns_.stop : patterns_.start;
    int progress = 0;
    for (int k = 3; k >= 1; --k) {
        if (window_ends_with(window_, bits_seen_, 0, p, 2 * k)) {
            progress = k;
            break;
        }
    }
    for (int j = 4; j > progress; --j) {
        if (window_ends_with(window_, bits_seen_, 0, p, 2 * j - 1)) {
            progress = j;
            break;
        }
    }
    if (progress == 0) return data_comm_ ? SeqDetState::DataComm : SeqDetState::Start;
    const int base = static_cast<int>(data_comm_ ? SeqDetState::StopCheck1 : SeqDetState::Check1);
    return static_cast<SeqDetState>(base + progress - 1);
}

DetectorEvents SequenceDetector::step(BitPair pair) {
    window_ = (window_ << 1) | pair.even;
    window_ = (window_ << 1) | pair.odd;
    bits_seen_ = std::min(bits_seen_ + 2, 32);

    const std::uint8_t p = data_comm_ ? patterns_.stop : patterns_.start;
    DetectorEvents ev;
    bool hit = false;
    if (window_ends_with(window_, bits_seen_, 0, p, 8)) {
        hit = true;
        ev.shift = false;
    } else if (window_ends_with(window_, bits_seen_, 1, p, 8)) {
        hit = true;
        ev.shift = true;
    }
    if (hit) {
        if (data_comm_) {
            ev.stop_detected = true;
            data_comm_ = false;
        } else {
            ev.start_detected = true;
            data_comm_ = true;
            shift_ = ev.shift;
        }
        window_ = 0;
        bits_seen_ = 0;
    }
    state_ = progress_label();
    return ev;
}

void SequenceDetector::reset() {
    window_ = 0;
    bits_seen_ = 0;
    data_comm_ = false;
    shift_ = false;
    state_ = SeqDetState::Start;
}

bool is_detector_edge(SeqDetState from, SeqDetState to) {
    using S = SeqDetState;
    auto search_rank = [](S s) { return s <= S::Check4 ? static_cast<int>(s) : -1; };
    auto stop_rank = [](S s) {
        if (s == S::DataComm) return 0;
        return s >= S::StopCheck1 ? static_cast<int>(s) - static_cast<int>(S::StopCheck1) + 1 : -1;
    };
    const int fs = search_rank(from), ts = search_rank(to);
    if (fs >= 0 && ts >= 0) return ts <= fs + 1;  // advance one pair or fall back
    const int fd = stop_rank(from), td = stop_rank(to);
    if (fd >= 0 && td >= 0) return td <= fd + 1;
    // Mode changes only on a completed pattern.
    if (fs >= 0 && to == S::DataComm) return from == S::Check3 || from == S::Check4;
    if (fd >= 0 && to == S::Start) return from == S::StopCheck3 || from == S::StopCheck4;
    return false;
}

// ---------------------------------------------------------------------------

RxEnables RxController::step(const RxControllerInputs& in) {
    RxEnables out;
    out.cdr_en = in.warm_en || in.comm_en;
    out.detector_en = in.comm_en;

    if (in.word_ready) valid_countdown_ = kDecoderLatency - 1;
    if (valid_countdown_ > 0) {
        --valid_countdown_;
    } else if (valid_countdown_ == 0) {
        out.valid_out = true;
        valid_countdown_ = -1;
    }

    if (!in.comm_en) {
        receiving_ = false;
    } else if (in.events.start_detected) {
        receiving_ = true;
        skip_ = kStartFlitTail;
    } else if (in.events.stop_detected) {
        receiving_ = false;
    } else if (receiving_) {
        if (skip_ > 0) {
            --skip_;
        } else {
            out.deserializer_en = true;
        }
    }
    out.decoder_en = receiving_ || valid_countdown_ >= 0 || out.valid_out;
    return out;
}

}  // namespace c2c
