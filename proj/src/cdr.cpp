#include "c2c/cdr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace c2c {

const char* to_string(PdDecision d) {
    switch (d) {
        case PdDecision::Early: return "early";
        case PdDecision::Late: return "late";
        case PdDecision::None: return "none";
    }
    return "?";
}

PdDecision alexander_pd(bool d_prev, bool edge, bool d_cur) {
    if (d_prev == d_cur) return PdDecision::None;
    // The edge sample still shows the old bit: we sampled before the transition.
    return edge == d_prev ? PdDecision::Early : PdDecision::Late;
}

int pd_batch(const std::array<bool, 8>& data, const std::array<bool, 8>& edge, bool last_prev, bool boundary) {
    int sum = 0;
    for (int i = boundary ? 0 : 1; i < 8; ++i) {
        const bool prev = i == 0 ? last_prev : data[i - 1];
        sum += static_cast<int>(alexander_pd(prev, edge[i], data[i]));
    }
    return sum;
}

bool valid_divider(int n) { return n >= 1 && n <= 128 && (n & (n - 1)) == 0; }

int loop_filter_update(CdrState& s, int sum) {
    s.accumulator += sum;
    ++s.batch_count;
    if (s.batch_count % s.n != 0) return 0;
    const auto step = s.accumulator / s.n;  // truncates toward zero
    s.accumulator -= step * s.n;
    return static_cast<int>(step);
}

const char* to_string(LoopFilterKind k) {
    return k == LoopFilterKind::Divider ? "divider" : "proportional-integral";
}

int pi_filter_update(CdrState& s, int sum, int k) {
    s.accumulator += sum;
    ++s.batch_count;
    if (s.batch_count % s.n != 0) return 0;
    const int e = (s.accumulator > 0) - (s.accumulator < 0);
    s.accumulator = 0;
    // Integrate only on two equal decisions in a row; a locked loop
    // alternates and leaves the frequency register alone.
    const int fmax = (kMaxStepsPerEvaluation - 1) * k;
    if (e != 0 && e == s.last_sign) s.freq = std::clamp(s.freq + e, -fmax, fmax);
    s.last_sign = e;
    s.freq_frac += s.freq;
    const int whole = s.freq_frac / k;
    s.freq_frac -= whole * k;
    return std::clamp(e + whole, -kMaxStepsPerEvaluation, kMaxStepsPerEvaluation);
}

void pi_apply(CdrState& s, int step) {
    s.pi_code = ((s.pi_code + step) % kPiPositions + kPiPositions) % kPiPositions;
    s.phase_steps += step;
}

double max_slew_ui_per_ui(int n, int detectors, double step_ui) {
    const double eval_ui = 2.0 * evaluation_cycles(n);  // two bits per cycle
    return detectors * step_ui / eval_ui;
}

std::vector<std::uint8_t> alternating_bits(std::size_t n) {
    std::vector<std::uint8_t> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(i & 1u);
    return b;
}

std::string RecoveryResult::trace_csv() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os << "time_ns,pi_code,phase_error_ui\n";
    for (const auto& p : trace) {
        os.precision(3);
        os << p.time_ns << ',' << p.pi_code << ',';
        os.precision(6);
        os << p.phase_error_ui << '\n';
    }
    return os.str();
}

CdrEngine::CdrEngine(const ChannelConfig& ch, int n, LoopFilterKind filter, int integral_k, bool boundary,
                     std::uint64_t seed)
    : ch_(ch), filter_(filter), k_(integral_k), boundary_(boundary), rng_(seed ^ 0x9e3779b97f4a7c15ull) {
    if (!valid_divider(n)) throw std::invalid_argument("CDR divider must be a power of two in 1..128");
    st_.n = n;
}

CdrEngine::Cycle CdrEngine::cycle(SignalSource& line, double t_ps) {
    Cycle out;
    for (int h = 0; h < 2; ++h) {
        const double td = t_ps + h * kUiPs;
        edge_[pos_] = sample(line, td - kUiPs / 2, ch_, rng_);
        data_[pos_] = sample(line, td, ch_, rng_);
        out.data[h] = data_[pos_];
        ++pos_;
    }
    if (pos_ < kBitsPerBatch) return out;
    pos_ = 0;
    out.batch_done = true;
    bool prev = last_data_;
    for (bool d : data_) {
        out.transitions |= d != prev;
        prev = d;
    }
    const int sum = pd_batch(data_, edge_, last_data_, boundary_);
    last_data_ = data_[7];
    const auto before = st_.batch_count;
    out.step = filter_ == LoopFilterKind::Divider ? loop_filter_update(st_, sum) : pi_filter_update(st_, sum, k_);
    out.evaluated = (before + 1) % st_.n == 0;
    if (out.step != 0) {
        pi_apply(st_, out.step);
        steps_issued_ += std::abs(out.step);
    }
    return out;
}

RecoveryResult recover_stream(const std::vector<std::uint8_t>& tx_bits, const RecoveryConfig& cfg) {
    if (!valid_divider(cfg.n)) throw std::invalid_argument("CDR divider must be a power of two in 1..128");
    const double ui_tx = kUiPs / (1.0 + cfg.freq_offset);
    StreamingLine line(cfg.channel, ui_tx, 0.0, cfg.seed);
    for (auto b : tx_bits) line.push(b != 0);
    const double d_cross = crossing_delay_ps(cfg.channel, ui_tx);
    CdrEngine eng(cfg.channel, cfg.n, cfg.filter, cfg.integral_k, cfg.boundary_detector, cfg.seed);

    const double phi0 = d_cross + ui_tx / 2 + cfg.initial_phase_ui * kUiPs;
    const double t_last = d_cross + static_cast<double>(tx_bits.size()) * ui_tx - kUiPs;
    const double step_ui = kPiStepPs / ui_tx;

    RecoveryResult res;
    res.bits.reserve(tx_bits.size());
    const auto n_tx = static_cast<std::int64_t>(tx_bits.size());
    int stable_run = 0;
    double run_start_ns = 0;
    bool tracking = false;
    std::int64_t j_expected = 0, j_last = 0;

    for (std::int64_t batch = 0;; ++batch) {
        const double phi = phi0 + eng.phase_ps();
        const double t_batch = static_cast<double>(batch * kCyclesPerBatch) * kClockPeriodPs;
        if (t_batch + phi + (kCyclesPerBatch - 1) * kClockPeriodPs + 1.5 * kUiPs > t_last) break;

        double batch_err = 0;
        for (int c = 0; c < kCyclesPerBatch; ++c) {
            const double t = t_batch + c * kClockPeriodPs + phi;
            const auto cyc = eng.cycle(line, t);
            for (int h = 0; h < 2; ++h) {
                const double td = t + h * kUiPs;
                const bool d = cyc.data[h];
                res.bits.push_back(d);

                const double x = (td - d_cross) / ui_tx;
                j_last = static_cast<std::int64_t>(std::floor(x));
                if (!tracking && !res.loss_of_lock && cfg.check_from_bit &&
                    j_last >= static_cast<std::int64_t>(*cfg.check_from_bit)) {
                    tracking = true;
                    j_expected = j_last - 1;
                }
                double err = x - static_cast<double>(j_last) - 0.5;
                if (tracking) {
                    // Unwrapped: a slip shows up as more than half a UI.
                    err = x - static_cast<double>(++j_expected) - 0.5;
                    if (std::abs(err) > 0.5) {
                        res.loss_of_lock = true;
                        tracking = false;
                        if (cfg.throw_on_loss) {
                            throw LossOfLock("phase error " + std::to_string(err) + " UI at " +
                                             std::to_string(td / 1000.0) + " ns");
                        }
                    } else if (j_expected >= 0 && j_expected < n_tx) {
                        ++res.bits_checked;
                        if ((tx_bits[j_expected] != 0) != d) ++res.bit_errors;
                    }
                }
                if (c == 0 && h == 0) batch_err = err;
            }
        }
        res.pi_steps_issued = eng.steps_issued();
        res.trace.push_back({t_batch / 1000.0, eng.state().pi_code, batch_err});

        if (!res.lock_time_ns && !res.loss_of_lock) {
            if (std::abs(batch_err) <= step_ui + 1e-12) {
                if (stable_run++ == 0) run_start_ns = t_batch / 1000.0;
                if (stable_run >= cfg.lock_window_batches) {
                    res.lock_time_ns = run_start_ns;
                    if (!tracking) {
                        tracking = true;
                        j_expected = j_last;
                    }
                }
            } else {
                stable_run = 0;
            }
        }
    }
    return res;
}

}  // namespace c2c
