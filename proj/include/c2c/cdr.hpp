#pragma once

// Clock-data recovery: Alexander phase detectors over 8 data + 8 edge
// samples per batch, an accumulate-and-divide loop filter and a 32-position
// phase interpolator on the 2-UI DDR clock.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2c/phy.hpp"

namespace c2c {

inline constexpr int kPiPositions = 32;
inline constexpr double kClockPeriodPs = 2500.0;
inline constexpr double kPiStepPs = kClockPeriodPs / kPiPositions;  // 78.125 ps
inline constexpr int kCyclesPerBatch = 4;
inline constexpr int kBitsPerBatch = 8;

enum class PdDecision : std::int8_t { Late = -1, None = 0, Early = 1 };
const char* to_string(PdDecision d);

/// edge is sampled half a UI before d_cur, between d_prev and d_cur.
PdDecision alexander_pd(bool d_prev, bool edge, bool d_cur);

/// #Early - #Late over one batch. edge[i] sits between data[i-1] and
/// data[i]; detector 0 uses last_prev as data[-1] unless boundary is off.
int pd_batch(const std::array<bool, 8>& data, const std::array<bool, 8>& edge, bool last_prev, bool boundary = true);

struct CdrState {
    int pi_code = 0;
    std::int64_t accumulator = 0;
    int n = 4;
    std::int64_t batch_count = 0;
    std::int64_t phase_steps = 0;  // unwrapped PI position
    // Second-order filter only.
    int freq = 0;       // steps per evaluation, in 1/k units
    int freq_frac = 0;  // pending fraction of a step, in 1/k units
    int last_sign = 0;
};

enum class LoopFilterKind : std::uint8_t {
    Divider,       // trunc(acc / N) every N batches
    ProportionalIntegral,  // sign(acc) plus a frequency integrator, every N batches
};
const char* to_string(LoopFilterKind k);

inline constexpr int kMaxStepsPerEvaluation = 7;

bool valid_divider(int n);

/// Adds one batch sum; every n batches returns trunc(acc / n) and keeps the
/// remainder. Zero otherwise.
int loop_filter_update(CdrState& s, int sum);
void pi_apply(CdrState& s, int step);

/// Same cadence as loop_filter_update, but the step is sign(acc) plus the
/// integer part of a frequency register that integrates sign(acc) in 1/k
/// steps. Steps are clamped to +-kMaxStepsPerEvaluation.
int pi_filter_update(CdrState& s, int sum, int k);

/// Loop-filter evaluation period in fast-clock cycles.
constexpr int evaluation_cycles(int n) { return kCyclesPerBatch * n; }

/// Largest phase correction rate in UI per UI: `detectors` steps of
/// step_ui every evaluation.
double max_slew_ui_per_ui(int n, int detectors, double step_ui);

/// Incremental loop: one call per fast-clock cycle. Data samples sit at t
/// and t + UI, edge samples half a UI before each; every kCyclesPerBatch
/// cycles the batch goes through the detectors and the filter and the PI
/// moves.
class CdrEngine {
public:
    struct Cycle {
        std::array<bool, 2> data{};
        bool evaluated = false;    // the filter produced an output this cycle
        bool batch_done = false;
        bool transitions = false;  // the finished batch saw a data transition
        int step = 0;
    };

    CdrEngine(const ChannelConfig& ch, int n, LoopFilterKind filter, int integral_k, bool boundary, std::uint64_t seed);

    Cycle cycle(SignalSource& line, double t_ps);
    const CdrState& state() const { return st_; }
    /// Current PI shift in ps, unwrapped.
    double phase_ps() const { return static_cast<double>(st_.phase_steps) * kPiStepPs; }
    std::int64_t steps_issued() const { return steps_issued_; }

private:
    ChannelConfig ch_;
    LoopFilterKind filter_;
    int k_;
    bool boundary_;
    std::mt19937_64 rng_;
    CdrState st_;
    std::array<bool, 8> data_{}, edge_{};
    int pos_ = 0;
    bool last_data_ = false;
    std::int64_t steps_issued_ = 0;
};

struct LossOfLock : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RecoveryConfig {
    ChannelConfig channel;
    double freq_offset = 0.0;       // TX faster by this fraction
    double initial_phase_ui = 0.0;  // data-sample offset from bit center at t = 0
    int n = 4;
    bool boundary_detector = true;
    LoopFilterKind filter = LoopFilterKind::ProportionalIntegral;
    int integral_k = 4;
    std::uint64_t seed = 1;
    int lock_window_batches = 64;
    /// Bit errors and slips are tracked from lock, or from the first data
    /// sample landing on this TX bit if that comes earlier.
    std::optional<std::size_t> check_from_bit;
    bool throw_on_loss = true;
};

struct PhaseTracePoint {
    double time_ns;
    int pi_code;
    double phase_error_ui;
};

struct RecoveryResult {
    std::vector<std::uint8_t> bits;  // data samples in order
    std::optional<double> lock_time_ns;
    std::int64_t pi_steps_issued = 0;  // sum of |step|
    std::int64_t bit_errors = 0;       // while tracking, against the TX bit under each sample
    std::int64_t bits_checked = 0;
    bool loss_of_lock = false;
    std::vector<PhaseTracePoint> trace;  // one point per batch

    std::string trace_csv() const;  // time_ns,pi_code,phase_error_ui
};

/// Closed loop: TX bits go through a streaming channel at the TX bit rate,
/// the RX samples them with its own clock shifted by the PI, and the loop
/// steers. Phase error is measured against the centre of the TX bit under
/// each data sample (after the channel crossing delay).
RecoveryResult recover_stream(const std::vector<std::uint8_t>& tx_bits, const RecoveryConfig& cfg);

/// Alternating training pattern.
std::vector<std::uint8_t> alternating_bits(std::size_t n);

}  // namespace c2c
