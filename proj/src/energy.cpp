#include "c2c/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace c2c {

PowerProfile PowerProfile::with_analog_scaled(double f) const {
    PowerProfile q = *this;
    const double analog = rx_analog_mw + tx_analog_mw;
    q.rx_analog_mw *= f;
    q.tx_analog_mw *= f;
    q.active_total_mw = active_total_mw - analog * (1 - f);
    return q;
}

void PowerProfile::validate() const {
    for (double v : {rx_analog_mw, tx_analog_mw, rx_dig_datacomm_mw, rx_dig_warm_mw, tx_dig_active_mw, dig_standby_mw,
                     active_total_mw, pg_overhead_pj, t_warm_s}) {
        if (v < 0) throw std::invalid_argument("power profile fields must be nonnegative");
    }
    if (line_rate_bps <= 0) throw std::invalid_argument("line rate must be positive");
    if (std::abs(active_total_mw - block_sum_mw()) > 0.005) {
        throw std::invalid_argument("active total disagrees with the block powers");
    }
}

EnergyReport duty_cycle_energy(const PowerProfile& p, const DutyCycleConfig& cfg) {
    if (cfg.buffer_bytes == 0 || cfg.target_bw_bps <= 0) throw std::invalid_argument("empty buffer or zero bandwidth");
    const double bits = 8.0 * static_cast<double>(cfg.buffer_bytes);
    EnergyReport r;
    r.t_act = bits / p.line_rate_bps;
    r.t_warm = p.t_warm_s;
    r.t_cycle = bits / cfg.target_bw_bps;
    r.t_idle = r.t_cycle - r.t_act - r.t_warm;
    if (r.t_idle < 0) {
        throw InfeasibleBandwidth(std::to_string(cfg.target_bw_bps / 1e6) + " Mbps exceeds BW_max " +
                                  std::to_string(bw_max(p, cfg.buffer_bytes) / 1e6) + " Mbps");
    }
    // mW * s = 1e9 pJ
    r.energy_pj = 1e9 * (p.active_mw() * r.t_act + p.warm_mw() * r.t_warm + p.idle_mw() * r.t_idle) + p.pg_overhead_pj;
    r.energy_per_bit_pj = r.energy_pj / bits;
    return r;
}

double continuous_energy(const PowerProfile& p) { return p.active_mw() * 1e9 / p.line_rate_bps; }

double bw_max(const PowerProfile& p, std::size_t buffer_bytes) {
    if (buffer_bytes == 0) throw std::invalid_argument("empty buffer");
    const double bits = 8.0 * static_cast<double>(buffer_bytes);
    return bits / (bits / p.line_rate_bps + p.t_warm_s);
}

// ---- reference curves

double ReferenceCurve::at(double bw_mbps) const {
    if (points.empty() || bw_mbps < min_bw_mbps() || bw_mbps > max_bw_mbps()) {
        throw CurveOutOfRange(name + ": " + std::to_string(bw_mbps) + " Mbps outside the digitized range");
    }
    auto hi = std::lower_bound(points.begin(), points.end(), bw_mbps,
                               [](const CurvePoint& a, double b) { return a.bw_mbps < b; });
    if (hi->bw_mbps == bw_mbps || hi == points.begin()) return hi->pj_per_bit;
    const auto lo = hi - 1;
    const double f = (bw_mbps - lo->bw_mbps) / (hi->bw_mbps - lo->bw_mbps);
    return lo->pj_per_bit + f * (hi->pj_per_bit - lo->pj_per_bit);
}

CurvePoint ReferenceCurve::best() const {
    return *std::min_element(points.begin(), points.end(),
                             [](const CurvePoint& a, const CurvePoint& b) { return a.pj_per_bit < b.pj_per_bit; });
}

std::string ReferenceCurve::csv() const {
    std::ostringstream os;
    os << "# " << label << '\n'
       << "# digitized from a published measurement figure; linear interpolation between points\n"
       << "bandwidth_mbps,energy_pj_per_bit\n";
    char buf[64];
    for (const auto& pt : points) {
        std::snprintf(buf, sizeof buf, "%.9g,%.15g\n", pt.bw_mbps, pt.pj_per_bit);
        os << buf;
    }
    return os.str();
}

ReferenceCurve parse_reference_curve(std::string_view name, std::string_view csv) {
    ReferenceCurve c;
    c.name = name;
    std::istringstream is{std::string(csv)};
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (c.label.empty()) c.label = line.substr(line.find_first_not_of("# "));
            continue;
        }
        if (!header) {
            if (line != "bandwidth_mbps,energy_pj_per_bit") throw std::invalid_argument("unexpected curve header");
            header = true;
            continue;
        }
        CurvePoint pt{};
        if (std::sscanf(line.c_str(), "%lf,%lf", &pt.bw_mbps, &pt.pj_per_bit) != 2) {
            throw std::invalid_argument("bad curve row: " + line);
        }
        c.points.push_back(pt);
    }
    if (c.points.empty()) throw std::invalid_argument("curve has no points");
    return c;
}

const std::vector<ReferenceCurve>& reference_curves() {
    static const std::vector<ReferenceCurve> curves = {
        {"single_spi",
         "Single SPI",
         {{0.001, 100},
          {0.050999, 67.9918465334806},
          {0.100998, 66.6300880126883},
          {0.150997, 65.8413979202736},
          {0.250995, 64.8581375818225},
          {0.350993, 64.2173591104389},
          {0.450991, 63.7424786216738},
          {0.600988, 63.2028684470398},
          {0.750985, 62.7872812858126},
          {0.900982, 62.4496587459783},
          {1.100978, 62.0800776162041},
          {1.300974, 61.7740263318322},
          {1.550969, 61.4533743678496},
          {1.800963, 61.1820558181741},
          {2.100958, 60.9035868652491},
          {2.400952, 60.6633742227293},
          {2.750945, 60.4194445639113},
          {3.150937, 60.1770726612017},
          {3.600928, 59.9396903091337},
          {4.100918, 59.709383096814},
          {4.650907, 59.4873013948615},
          {5.300894, 59.2573393350504},
          {6.00088, 59.0401217601795},
          {6.800864, 58.8217621292076},
          {7.700846, 58.6057076116804},
          {8.750825, 58.384331523279},
          {9.900802, 58.1712835504449},
          {11.250775, 57.9515425059938},
          {12.750745, 57.737193341301},
          {45.100098, 55.6174446052216},
          {50, 55.4478584932744}}},
        {"quad_spi_sdr",
         "Quad SPI SDR",
         {{0.1, 75.193929},
          {0.3, 39.83659566},
          {0.7, 29.73450043},
          {3, 23.92579566},
          {7, 22.91558614},
          {10, 22.688289},
          {20, 22.423109},
          {30, 22.33471566},
          {40, 22.290519},
          {50, 22.264001},
          {100, 22.210965},
          {150, 22.19328633},
          {200, 22.184447}}},
        {"quad_spi_ddr",
         "Quad SPI DDR",
         {{0.1, 69.65444675},
          {0.3, 34.29711341},
          {0.7, 24.19501818},
          {3, 18.38631341},
          {7, 17.37610389},
          {10, 17.14880675},
          {20, 16.88362675},
          {30, 16.79523341},
          {40, 16.75103675},
          {50, 16.72451875},
          {100, 16.67148275},
          {150, 16.65380408},
          {200, 16.64496475},
          {250, 16.63966115},
          {300, 16.63612541},
          {350, 16.63359989},
          {400, 16.63170575}}},
        {"octal_spi_sdr",
         "Octal SPI SDR",
         {{0.1, 96.17244675},
          {0.3, 43.13644675},
          {0.7, 27.98330389},
          {3, 19.27024675},
          {7, 17.75493246},
          {10, 17.41398675},
          {20, 17.01621675},
          {30, 16.88362675},
          {40, 16.81733175},
          {50, 16.77755475},
          {100, 16.69800075},
          {150, 16.67148275},
          {200, 16.65822375},
          {250, 16.65026835},
          {300, 16.64496475},
          {350, 16.64117646},
          {400, 16.63833525}}},
        {"octal_spi_ddr",
         "Octal SPI DDR",
         {{0.1, 93.40270562},   {0.3, 40.36670562},   {0.7, 25.21356277},   {3, 16.50050562},
          {7, 14.98519134},     {10, 14.64424562},    {20, 14.24647562},    {30, 14.11388562},
          {40, 14.04759062},    {50, 14.00781362},    {100, 13.92825962},   {150, 13.90174162},
          {200, 13.88848262},   {250, 13.88052722},   {300, 13.87522362},   {350, 13.87143534},
          {400, 13.86859412},   {450, 13.86638429},   {500, 13.86461642},   {550, 13.86316999},
          {600, 13.86196462},   {650, 13.8609447},    {700, 13.86007048},   {750, 13.85931282},
          {800, 13.85864987}}},
        {"hyperbus", "HyperBus", {{0.1, 113.85}, {1600, 113.85}}},
        {"serdes_16kb",
         "SerDes, 16 KB buffer (published curve)",
         {{0.1, 26.55114746},  {0.3, 13.21781413},  {0.7, 9.408290318},  {1, 8.551147461},   {3, 7.217814128},
          {5, 6.951147461},    {7, 6.836861747},    {10, 6.751147461},   {20, 6.651147461},  {30, 6.617814128},
          {40, 6.601147461},   {50, 6.591147461},   {100, 6.571147461},  {150, 6.564480794}, {200, 6.561147461},
          {250, 6.559147461},  {300, 6.557814128},  {350, 6.556861747},  {400, 6.556147461}, {450, 6.555591905},
          {500, 6.555147461},  {550, 6.554783825},  {600, 6.554480794},  {650, 6.554224384}, {700, 6.554004604},
          {750, 6.553814128},  {793, 6.553669529}}},
    };
    return curves;
}

const ReferenceCurve& reference_curve(std::string_view name) {
    for (const auto& c : reference_curves()) {
        if (c.name == name) return c;
    }
    throw std::invalid_argument("unknown reference curve '" + std::string(name) + "'");
}

ComparisonResult compare_peripherals(const PowerProfile& p, std::size_t buffer_bytes, double serdes_bw_bps,
                                     std::string_view curve, Comparison mode) {
    const auto& ref = reference_curve(curve);
    ComparisonResult r;
    r.serdes_bw_mbps = serdes_bw_bps / 1e6;
    r.serdes_pj_per_bit = duty_cycle_energy(p, {serdes_bw_bps, buffer_bytes}).energy_per_bit_pj;
    if (mode == Comparison::SameBandwidth) {
        r.reference_bw_mbps = r.serdes_bw_mbps;
        r.reference_pj_per_bit = ref.at(r.serdes_bw_mbps);
    } else {
        const auto b = ref.best();
        r.reference_bw_mbps = b.bw_mbps;
        r.reference_pj_per_bit = b.pj_per_bit;
    }
    r.ratio = r.reference_pj_per_bit / r.serdes_pj_per_bit;
    return r;
}

std::string energy_curves_csv(const PowerProfile& p, const std::vector<double>& bws_mbps,
                              const std::vector<double>& buffers_kb) {
    std::ostringstream os;
    os << "bandwidth_mbps,buffer_kb,energy_pj_per_bit\n";
    char buf[96];
    for (double bw : bws_mbps) {
        for (double kb : buffers_kb) {
            const auto bytes = static_cast<std::size_t>(std::llround(kb * 1024));
            if (bytes == 0 || bw * 1e6 > bw_max(p, bytes)) continue;
            const double e = duty_cycle_energy(p, {bw * 1e6, bytes}).energy_per_bit_pj;
            std::snprintf(buf, sizeof buf, "%g,%g,%.9f\n", bw, kb, e);
            os << buf;
        }
    }
    return os.str();
}

// ---- mode timeline

const char* to_string(LinkMode m) {
    switch (m) {
        case LinkMode::Idle: return "idle";
        case LinkMode::WarmUp: return "warmup";
        case LinkMode::DataComm: return "datacomm";
    }
    return "?";
}

namespace {

double mode_mw(const PowerProfile& p, LinkMode m) {
    switch (m) {
        case LinkMode::Idle: return p.idle_mw();
        case LinkMode::WarmUp: return p.warm_mw();
        case LinkMode::DataComm: return p.active_mw();
    }
    return 0;
}

}  // namespace

int power_up_edges(const ModeLog& log) {
    int n = 0;
    LinkMode cur = log.initial;
    for (const auto& e : log.events) {
        if (cur == LinkMode::Idle && e.mode != LinkMode::Idle) ++n;
        cur = e.mode;
    }
    return n;
}

double energy_trace(const ModeLog& log, const PowerProfile& p) {
    double joules = 0;
    double t = log.start_s;
    LinkMode cur = log.initial;
    for (const auto& e : log.events) {
        if (e.time_s < t) throw std::invalid_argument("mode log is not time-ordered");
        joules += mode_mw(p, cur) * 1e-3 * (e.time_s - t);
        t = e.time_s;
        cur = e.mode;
    }
    if (log.end_s < t) throw std::invalid_argument("mode log ends before its last event");
    joules += mode_mw(p, cur) * 1e-3 * (log.end_s - t);
    return joules + power_up_edges(log) * p.pg_overhead_pj * 1e-12;
}

}  // namespace c2c
