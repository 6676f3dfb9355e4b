#include "c2c/phy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace c2c {

namespace {

// Response of a first-order low-pass, started at y0, to u(s) = a + b*s.
double ramp_response(double y0, double a, double b, double tau, double s) {
    if (tau <= 0) return a + b * s;
    return a + b * s - b * tau + (y0 - a + b * tau) * std::exp(-s / tau);
}

// Response inside one driven bit: a ramp from prev to level over rise_ps,
// then flat. s is the time since the bit boundary.
double bit_response(double y0, double prev, double level, double rise_ps, double tau, double s) {
    if (rise_ps <= 0 || prev == level) return ramp_response(y0, level, 0.0, tau, s);
    const double b = (level - prev) / rise_ps;
    if (s <= rise_ps) return ramp_response(y0, prev, b, tau, s);
    const double y1 = ramp_response(y0, prev, b, tau, rise_ps);
    return ramp_response(y1, level, 0.0, tau, s - rise_ps);
}

}  // namespace

double ChannelCalibration::tau_ps(double length_cm) const {
    if (length_cm <= 0) return 0.0;
    return a_ps * std::pow(length_cm, k);
}

ChannelCalibration default_calibration() {
    // solve_tau_for_height(0.418) at 2 cm and (0.386) at 5 cm, frozen.
    constexpr double tau2 = 321.0375;
    constexpr double tau5 = 424.5247;
    const double k = std::log(tau5 / tau2) / std::log(2.5);
    return {tau2 / std::pow(2.0, k), k};
}

double channel_tau_ps(const ChannelConfig& cfg) {
    if (cfg.tau_override_ps >= 0) return cfg.tau_override_ps;
    return default_calibration().tau_ps(cfg.trace_length_cm);
}

double Waveform::at(double t_ps) const {
    if (samples_.size() == 0 || t_ps < t0_ || t_ps > t_end()) {
        throw OutOfRange("sample time " + std::to_string(t_ps) + " ps outside waveform");
    }
    const double x = (t_ps - t0_) / dt_;
    const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(x), samples_.size() - 2);
    if (samples_.size() == 1) return samples_[0];
    const double f = x - static_cast<double>(i);
    return samples_[i] + f * (samples_[i + 1] - samples_[i]);
}

Waveform drive(std::span<const std::uint8_t> bits, const ChannelConfig& cfg, double ui_ps) {
    const int spu = cfg.samples_per_ui;
    const double dt = ui_ps / spu;
    const double rise = cfg.rise_time_ui * ui_ps;
    const double hi = cfg.swing / 2;
    auto level = [&](std::size_t k) { return bits[k] ? hi : -hi; };

    Eigen::VectorXd v(static_cast<Eigen::Index>(bits.size() * spu + 1));
    if (bits.empty()) {
        v.resize(1);
        v[0] = -hi;
        return {v, 0.0, dt};
    }
    for (std::size_t k = 0; k < bits.size(); ++k) {
        const double prev = k > 0 ? level(k - 1) : level(0);
        const double cur = level(k);
        for (int j = 0; j < spu; ++j) {
            const double s = j * dt;
            double x = cur;
            if (s < rise) x = prev + (cur - prev) * s / rise;
            v[static_cast<Eigen::Index>(k * spu + j)] = x;
        }
    }
    v[v.size() - 1] = level(bits.size() - 1);
    return {v, 0.0, dt};
}

Waveform channel_apply(const Waveform& w, const ChannelConfig& cfg, std::mt19937_64& rng) {
    const double tau = channel_tau_ps(cfg);
    const auto& u = w.samples();
    Eigen::VectorXd y(u.size());
    if (u.size() > 0) y[0] = u[0];
    for (Eigen::Index i = 0; i + 1 < u.size(); ++i) {
        const double b = (u[i + 1] - u[i]) / w.dt();
        y[i + 1] = ramp_response(y[i], u[i], b, tau, w.dt());
    }
    if (cfg.noise_sigma > 0) {
        std::normal_distribution<double> n(0.0, cfg.noise_sigma);
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += n(rng);
    }
    return {y, w.t0() + cfg.prop_delay_ps, w.dt()};
}

bool sample(SignalSource& src, double t_ps, const ChannelConfig& cfg, std::mt19937_64& rng) {
    if (cfg.rj_sigma_ps > 0) t_ps += std::normal_distribution<double>(0.0, cfg.rj_sigma_ps)(rng);
    const double v = src.voltage(t_ps) - cfg.comparator_offset;
    if (std::abs(v) < 1e-12) return cfg.tie_value;  // rounding residue counts as a tie
    return v > 0;
}

std::string EyeDiagram::csv() const {
    std::ostringstream os;
    os << "phase_bin,voltage_bin,count\n";
    for (int p = 0; p < phase_bins; ++p) {
        for (int v = 0; v < voltage_bins; ++v) {
            if (counts(p, v) != 0) os << p << ',' << v << ',' << counts(p, v) << '\n';
        }
    }
    return os.str();
}

std::string EyeDiagram::summary_csv() const {
    std::ostringstream os;
    os.precision(6);
    os << "eye_height_v,eye_width_ui\n" << std::fixed << eye_height_v << ',' << eye_width_ui << '\n';
    return os.str();
}

EyeDiagram eye_capture(const Waveform& w, double ui_ps, int n_ui, int voltage_bins) {
    const double spu_f = ui_ps / w.dt();
    const int spu = static_cast<int>(std::lround(spu_f));
    if (spu < 1 || std::abs(spu_f - spu) > 1e-9) throw std::invalid_argument("sample spacing must divide the UI");
    const Eigen::Index need = static_cast<Eigen::Index>(n_ui) * spu + 1;
    if (n_ui < 2 || w.size() < need) throw InsufficientSpan("waveform shorter than the requested eye window");

    const Eigen::Index first = w.size() - need;
    const auto seg = w.samples().segment(first, need);
    const int window = 2 * spu;

    EyeDiagram eye;
    eye.phase_bins = window;
    eye.voltage_bins = voltage_bins;
    eye.v_min = seg.minCoeff();
    eye.v_max = seg.maxCoeff();
    if (eye.v_max <= eye.v_min) eye.v_max = eye.v_min + 1e-12;
    eye.counts = Eigen::MatrixXi::Zero(window, voltage_bins);

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> pos_min(window, inf), neg_max(window, -inf);
    const double span = eye.v_max - eye.v_min;
    for (Eigen::Index i = 0; i + 1 < need; ++i) {
        const int p = static_cast<int>(i % window);
        const double v = seg[i];
        const int vb = std::min(voltage_bins - 1, static_cast<int>((v - eye.v_min) / span * voltage_bins));
        ++eye.counts(p, vb);
        if (v > 0) pos_min[p] = std::min(pos_min[p], v);
        if (v < 0) neg_max[p] = std::max(neg_max[p], v);
    }
    for (int p = 0; p < window; ++p) {
        if (pos_min[p] == inf || neg_max[p] == -inf) continue;
        const double open = pos_min[p] - neg_max[p];
        if (open > eye.eye_height_v) {
            eye.eye_height_v = open;
            eye.best_phase_ui = static_cast<double>(p) / spu;
        }
    }

    std::vector<double> crossings;
    for (Eigen::Index i = 0; i + 1 < need; ++i) {
        const double a = seg[i], b = seg[i + 1];
        if (a == 0) {
            crossings.push_back(static_cast<double>(i));
        } else if ((a < 0 && b > 0) || (a > 0 && b < 0)) {
            crossings.push_back(static_cast<double>(i) + a / (a - b));
        }
    }
    if (crossings.empty()) {
        eye.eye_width_ui = 1.0;
    } else {
        for (auto& c : crossings) c = std::fmod(c / spu, 1.0);
        std::sort(crossings.begin(), crossings.end());
        double gap = crossings.front() + 1.0 - crossings.back();
        for (std::size_t i = 1; i < crossings.size(); ++i) gap = std::max(gap, crossings[i] - crossings[i - 1]);
        eye.eye_width_ui = gap;
    }
    return eye;
}

std::vector<std::uint8_t> prbs7(std::size_t n) {
    std::vector<std::uint8_t> out(n);
    unsigned reg = 0x7F;
    for (auto& b : out) {
        const unsigned nb = ((reg >> 6) ^ (reg >> 5)) & 1u;
        reg = ((reg << 1) | nb) & 0x7Fu;
        b = static_cast<std::uint8_t>(nb);
    }
    return out;
}

double calibration_eye_height(double tau_ps, const ChannelConfig& base) {
    ChannelConfig cfg = base;
    cfg.noise_sigma = 0;
    cfg.tau_override_ps = tau_ps;
    constexpr int n_ui = 150, settle = 30;
    const auto bits = prbs7(n_ui + settle);
    std::mt19937_64 rng(0);
    return eye_capture(channel_apply(drive(bits, cfg), cfg, rng), kUiPs, n_ui).eye_height_v;
}

double solve_tau_for_height(double target_v, const ChannelConfig& cfg) {
    double lo = 0, hi = 20 * kUiPs;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (calibration_eye_height(mid, cfg) > target_v) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

StreamingLine::StreamingLine(const ChannelConfig& cfg, double ui_ps, double t_start_ps, std::uint64_t noise_seed)
    : cfg_(cfg),
      ui_(ui_ps),
      t_start_(t_start_ps),
      tau_(channel_tau_ps(cfg)),
      rise_ps_(cfg.rise_time_ui * ui_ps),
      rng_(noise_seed),
      noise_(0.0, cfg.noise_sigma > 0 ? cfg.noise_sigma : 1.0) {
    y_.push_back(-cfg.swing / 2);
}

void StreamingLine::push(bool bit) {
    const double hi = cfg_.swing / 2;
    const double prev = levels_.empty() ? -hi : levels_.back();
    const double level = bit ? hi : -hi;
    levels_.push_back(static_cast<float>(level));
    y_.push_back(bit_response(y_.back(), prev, level, rise_ps_, tau_, ui_));
}

double StreamingLine::clean_voltage(double t_ps) const {
    const double hi = cfg_.swing / 2;
    const double s_all = t_ps - cfg_.prop_delay_ps - t_start_;
    if (s_all < 0 || levels_.empty()) return -hi;
    const auto n = levels_.size();
    const auto k = static_cast<std::size_t>(s_all / ui_);
    if (k >= n) {
        const double level = levels_.back();
        return ramp_response(y_[n], level, 0.0, tau_, s_all - static_cast<double>(n) * ui_);
    }
    const double prev = k > 0 ? levels_[k - 1] : -hi;
    return bit_response(y_[k], prev, levels_[k], rise_ps_, tau_, s_all - static_cast<double>(k) * ui_);
}

double StreamingLine::voltage(double t_ps) {
    double v = clean_voltage(t_ps);
    if (cfg_.noise_sigma > 0) v += noise_(rng_);
    return v;
}

double crossing_delay_ps(const ChannelConfig& cfg, double ui_ps) {
    ChannelConfig c = cfg;
    c.noise_sigma = 0;
    StreamingLine line(c, ui_ps, 0.0, 0);
    constexpr int n = 200;
    for (int i = 0; i < n; ++i) line.push(i & 1);
    const double b0 = (n - 2) * ui_ps + c.prop_delay_ps;  // falling boundary
    double lo = b0, hi = b0 + ui_ps;
    const double vlo = line.clean_voltage(lo), vhi = line.clean_voltage(hi);
    if ((vlo < 0) == (vhi < 0)) return c.prop_delay_ps + 0.5 * c.rise_time_ui * ui_ps;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((line.clean_voltage(mid) < 0) == (vlo < 0)) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi) - (n - 2) * ui_ps;
}

}  // namespace c2c
