#pragma once

// Power-state accounting and the duty-cycled energy model. Powers are in
// mW, energies in pJ, times in seconds and rates in bits/s unless a name
// says otherwise.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace c2c {

struct InfeasibleBandwidth : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CurveOutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PowerProfile {
    double rx_analog_mw = 3.66;
    double tx_analog_mw = 0.695;
    double rx_dig_datacomm_mw = 0.591;  // back-annotated simulation, not a measurement
    double rx_dig_warm_mw = 0.368;
    double tx_dig_active_mw = 0.253;    // same in warm-up and data-comm
    double dig_standby_mw = 0.001;      // per side
    /// Reported data-comm total. The block values above are rounded and sum
    /// to 5.199; the total is what the curves were computed with.
    double active_total_mw = 5.2;
    double pg_overhead_pj = 120.0;      // per analog power-up
    double t_warm_s = 1.39e-6;
    double line_rate_bps = 0.8e9;

    double block_sum_mw() const { return rx_analog_mw + tx_analog_mw + rx_dig_datacomm_mw + tx_dig_active_mw; }
    double active_mw() const { return active_total_mw; }
    double warm_mw() const { return rx_analog_mw + tx_analog_mw + rx_dig_warm_mw + tx_dig_active_mw; }
    double idle_mw() const { return 2 * dig_standby_mw; }

    /// Scales both analog blocks and moves the active total with them.
    PowerProfile with_analog_scaled(double f) const;
    /// Throws std::invalid_argument on a negative field or a total that
    /// disagrees with the blocks by more than table rounding.
    void validate() const;
};

struct DutyCycleConfig {
    double target_bw_bps = 50e6;
    std::size_t buffer_bytes = 16 * 1024;
};

struct EnergyReport {
    double t_act = 0, t_warm = 0, t_idle = 0, t_cycle = 0;
    double energy_pj = 0;  // per cycle
    double energy_per_bit_pj = 0;
};

EnergyReport duty_cycle_energy(const PowerProfile& p, const DutyCycleConfig& cfg);

/// Always-on link: pJ per bit at the line rate.
double continuous_energy(const PowerProfile& p);

/// Highest average bandwidth once warm-up is paid for every buffer.
double bw_max(const PowerProfile& p, std::size_t buffer_bytes);

struct CurvePoint {
    double bw_mbps;
    double pj_per_bit;
};

struct ReferenceCurve {
    std::string name;   // file stem, e.g. "single_spi"
    std::string label;  // human-readable
    std::vector<CurvePoint> points;  // ascending bandwidth

    double min_bw_mbps() const { return points.front().bw_mbps; }
    double max_bw_mbps() const { return points.back().bw_mbps; }
    /// Linear interpolation between digitized points; CurveOutOfRange outside.
    double at(double bw_mbps) const;
    /// Lowest-energy point on the curve.
    CurvePoint best() const;
    /// bandwidth_mbps,energy_pj_per_bit with a comment header.
    std::string csv() const;
};

/// Bundled peripheral curves: single_spi, quad_spi_sdr, quad_spi_ddr,
/// octal_spi_sdr, octal_spi_ddr, hyperbus, plus serdes_16kb (the published
/// SerDes curve, kept for cross-checking the model).
const std::vector<ReferenceCurve>& reference_curves();
/// std::invalid_argument for an unknown name.
const ReferenceCurve& reference_curve(std::string_view name);
/// Parses the csv() format back (comments skipped).
ReferenceCurve parse_reference_curve(std::string_view name, std::string_view csv);

enum class Comparison {
    SameBandwidth,  // reference read at the SerDes bandwidth
    BestCase,       // reference at its own most efficient point
};

struct ComparisonResult {
    double serdes_bw_mbps = 0;
    double serdes_pj_per_bit = 0;
    double reference_bw_mbps = 0;
    double reference_pj_per_bit = 0;
    double ratio = 0;  // reference / serdes
};

ComparisonResult compare_peripherals(const PowerProfile& p, std::size_t buffer_bytes, double serdes_bw_bps,
                                     std::string_view curve, Comparison mode);

/// bandwidth_mbps,buffer_kb,energy_pj_per_bit over the grid; infeasible
/// points are left out.
std::string energy_curves_csv(const PowerProfile& p, const std::vector<double>& bws_mbps,
                              const std::vector<double>& buffers_kb);

enum class LinkMode { Idle, WarmUp, DataComm };
const char* to_string(LinkMode m);

struct ModeEvent {
    double time_s;
    LinkMode mode;
};

/// Mode timeline: `initial` holds from start_s until the first event, each
/// event holds until the next, the last until end_s.
struct ModeLog {
    double start_s = 0;
    double end_s = 0;
    LinkMode initial = LinkMode::Idle;
    std::vector<ModeEvent> events;  // non-decreasing time
};

/// Piecewise-constant power integral plus pg_overhead for every Idle -> on
/// edge. Joules.
double energy_trace(const ModeLog& log, const PowerProfile& p);
int power_up_edges(const ModeLog& log);

}  // namespace c2c
