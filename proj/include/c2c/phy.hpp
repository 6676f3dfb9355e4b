#pragma once

// Behavioral analog layer: NRZ driver, first-order low-pass channel with
// delay and noise, comparator sampling and eye capture.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace c2c {

inline constexpr double kUiPs = 1250.0;  // 0.8 Gbps

struct OutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientSpan : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChannelConfig {
    double swing = 0.44;          // V, differential peak-to-peak
    double trace_length_cm = 2.0;
    double prop_delay_ps = 140.0;
    double noise_sigma = 1e-3;    // V, per sample
    double rj_sigma_ps = 2.0;     // sampling-time jitter
    double rise_time_ui = 0.1;
    int samples_per_ui = 32;
    double comparator_offset = 0.0;
    bool tie_value = false;
    /// Overrides the length-derived time constant when >= 0.
    double tau_override_ps = -1.0;
};

/// Frozen two-point calibration of the trace-length -> time-constant map,
/// tau = a * L^k (ps, cm).
struct ChannelCalibration {
    double a_ps = 0;
    double k = 0;
    double tau_ps(double length_cm) const;
};
ChannelCalibration default_calibration();

/// Time constant of the channel low-pass for cfg (0 = no filtering).
double channel_tau_ps(const ChannelConfig& cfg);

/// Anything a comparator can sample.
class SignalSource {
public:
    virtual ~SignalSource() = default;
    virtual double voltage(double t_ps) = 0;
};

class Waveform : public SignalSource {
public:
    Waveform() = default;
    Waveform(Eigen::VectorXd samples, double t0_ps, double dt_ps)
        : samples_(std::move(samples)), t0_(t0_ps), dt_(dt_ps) {}

    const Eigen::VectorXd& samples() const { return samples_; }
    Eigen::VectorXd& samples() { return samples_; }
    double t0() const { return t0_; }
    double dt() const { return dt_; }
    double t_end() const { return t0_ + dt_ * static_cast<double>(samples_.size() - 1); }
    Eigen::Index size() const { return samples_.size(); }

    /// Linear interpolation; throws OutOfRange outside [t0, t_end].
    double at(double t_ps) const;
    double voltage(double t_ps) override { return at(t_ps); }

private:
    Eigen::VectorXd samples_;
    double t0_ = 0;
    double dt_ = 1;
};

/// Ideal NRZ at +-swing/2: bit i occupies [i*UI, (i+1)*UI), transitions
/// are linear ramps of rise_time starting at the bit boundary. One extra
/// sample closes the last bit.
Waveform drive(std::span<const std::uint8_t> bits, const ChannelConfig& cfg, double ui_ps = kUiPs);

/// Delay, first-order low-pass (exact for the piecewise-linear input) and
/// additive Gaussian noise per sample. The filter starts settled at the
/// first sample's value.
Waveform channel_apply(const Waveform& w, const ChannelConfig& cfg, std::mt19937_64& rng);

/// Comparator decision at t with Gaussian timing jitter.
bool sample(SignalSource& src, double t_ps, const ChannelConfig& cfg, std::mt19937_64& rng);

struct EyeDiagram {
    int phase_bins = 0;
    int voltage_bins = 0;
    double v_min = 0;
    double v_max = 0;
    Eigen::MatrixXi counts;  // phase x voltage
    double eye_height_v = 0;
    double eye_width_ui = 0;
    double best_phase_ui = 0;  // within the 2 UI window

    std::string csv() const;          // phase_bin,voltage_bin,count
    std::string summary_csv() const;  // eye_height_v,eye_width_ui
};

/// Folds the last n_ui UIs of w modulo 2 UI. Height is the largest
/// vertical opening around 0 V over phase bins; width is the largest gap
/// between zero crossings folded onto one UI.
EyeDiagram eye_capture(const Waveform& w, double ui_ps = kUiPs, int n_ui = 150, int voltage_bins = 64);

/// Fixed calibration stimulus: PRBS7 from an all-ones seed, as 0/1 bytes.
std::vector<std::uint8_t> prbs7(std::size_t n);

/// Eye height of the calibration stimulus through a noiseless channel
/// with the given time constant.
double calibration_eye_height(double tau_ps, const ChannelConfig& cfg = {});

/// Time constant giving target eye height, by bisection.
double solve_tau_for_height(double target_v, const ChannelConfig& cfg = {});

/// Analytic channel for long runs: bits are pushed as the TX launches them
/// and the filtered, delayed voltage is evaluated in closed form on demand.
/// Before the first bit the line sits at -swing/2; after the last pushed
/// bit the driver holds its level.
class StreamingLine : public SignalSource {
public:
    StreamingLine(const ChannelConfig& cfg, double ui_ps, double t_start_ps, std::uint64_t noise_seed);

    void push(bool bit);
    std::size_t bits_pushed() const { return levels_.size(); }
    double ui_ps() const { return ui_; }
    double t_start_ps() const { return t_start_; }

    double clean_voltage(double t_ps) const;
    double voltage(double t_ps) override;

private:
    ChannelConfig cfg_;
    double ui_, t_start_, tau_, rise_ps_;
    std::vector<float> levels_;
    std::vector<double> y_;  // filter state at each bit start; y_[k] at bit k
    std::mt19937_64 rng_;
    std::normal_distribution<double> noise_;
};

/// Time from a bit boundary at the driver to the resulting 0 V crossing
/// at the receiver, measured on a long alternating pattern.
double crossing_delay_ps(const ChannelConfig& cfg, double ui_ps = kUiPs);

}  // namespace c2c
