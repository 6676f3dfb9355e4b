#include "c2c/energy.hpp"
#include "doctest.h"
#include "reference_grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace c2c;

namespace {

constexpr std::size_t KB = 1024;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

ModeLog one_cycle(const EnergyReport& r, double t0 = 0) {
    ModeLog log;
    log.start_s = t0;
    log.events = {{t0, LinkMode::WarmUp}, {t0 + r.t_warm, LinkMode::DataComm}, {t0 + r.t_warm + r.t_act, LinkMode::Idle}};
    log.end_s = t0 + r.t_cycle;
    return log;
}

}  // namespace

TEST_CASE("duty cycle: hand arithmetic at 50 Mbps, 16 KB") {
    const auto r = duty_cycle_energy({}, {50e6, 16 * KB});
    const double bits = 131072;
    CHECK(r.t_act == doctest::Approx(163.84e-6));
    CHECK(r.t_cycle == doctest::Approx(2621.44e-6));
    CHECK(r.t_idle == doctest::Approx(2621.44e-6 - 163.84e-6 - 1.39e-6));
    CHECK(r.t_cycle == doctest::Approx(r.t_act + r.t_warm + r.t_idle));
    const double joules = 5.2e-3 * 163.84e-6 + 4.976e-3 * 1.39e-6 + 2e-6 * r.t_idle + 120e-12;
    CHECK(r.energy_per_bit_pj == doctest::Approx(joules / bits * 1e12).epsilon(1e-12));
    CHECK(r.energy_per_bit_pj == doctest::Approx(6.591).epsilon(1e-4));
}

TEST_CASE("duty cycle reproduces the published buffer grid") {
    using namespace testdata;
    double worst = 0;
    for (std::size_t i = 0; i < kGridBwMbps.size(); ++i) {
        for (std::size_t j = 0; j < kGridBufferKb.size(); ++j) {
            const auto bytes = static_cast<std::size_t>(kGridBufferKb[j] * KB);
            const double e = duty_cycle_energy({}, {kGridBwMbps[i] * 1e6, bytes}).energy_per_bit_pj;
            worst = std::max(worst, rel(e, kGridPj[i][j]));
            CHECK_MESSAGE(rel(e, kGridPj[i][j]) < 0.005, kGridBwMbps[i] << " Mbps " << kGridBufferKb[j] << " KB");
        }
    }
    CHECK(worst < 1e-4);  // in practice the grid matches to rounding
    CHECK(duty_cycle_energy({}, {50e6, 512}).energy_per_bit_pj == doctest::Approx(8.254).epsilon(1e-4));
    CHECK(duty_cycle_energy({}, {600e6, 64 * KB}).energy_per_bit_pj == doctest::Approx(6.514).epsilon(1e-4));
}

TEST_CASE("bigger buffers help, with diminishing returns") {
    for (double bw : {1.0, 10.0, 50.0, 100.0, 200.0, 400.0, 600.0}) {
        double prev = 1e300;
        for (std::size_t bytes = 512; bytes <= 64 * KB; bytes *= 2) {
            const double e = duty_cycle_energy({}, {bw * 1e6, bytes}).energy_per_bit_pj;
            CHECK(e < prev);
            prev = e;
        }
        const double e16 = duty_cycle_energy({}, {bw * 1e6, 16 * KB}).energy_per_bit_pj;
        const double e64 = duty_cycle_energy({}, {bw * 1e6, 64 * KB}).energy_per_bit_pj;
        CHECK((e16 - e64) / e16 < 0.01);
    }
}

TEST_CASE("bandwidth above BW_max is infeasible") {
    CHECK_THROWS_AS(duty_cycle_energy({}, {794e6, 16 * KB}), InfeasibleBandwidth);
    CHECK_NOTHROW(duty_cycle_energy({}, {793e6, 16 * KB}));
    CHECK_THROWS_AS(duty_cycle_energy({}, {700e6, 512}), InfeasibleBandwidth);
    CHECK_THROWS_AS(duty_cycle_energy({}, {50e6, 0}), std::invalid_argument);
}

TEST_CASE("continuous operation") {
    const PowerProfile p;
    CHECK(p.active_mw() == doctest::Approx(5.2));
    CHECK(p.block_sum_mw() == doctest::Approx(5.2).epsilon(1e-3));
    CHECK(p.warm_mw() == doctest::Approx(4.976));
    CHECK(p.idle_mw() == doctest::Approx(0.002));
    CHECK_NOTHROW(p.validate());
    CHECK(continuous_energy(p) == doctest::Approx(6.5));
    CHECK(continuous_energy(p.with_analog_scaled(0.5)) == doctest::Approx((5.2 - (3.66 + 0.695) / 2) / 0.8));
    CHECK(continuous_energy(p.with_analog_scaled(0.5)) == doctest::Approx(3.78).epsilon(1e-3));
    CHECK_NOTHROW(p.with_analog_scaled(0.5).validate());
    PowerProfile zero{0, 0, 0, 0, 0, 0, 0, 0, 0, 0.8e9};
    CHECK(continuous_energy(zero) == 0.0);
    PowerProfile bad;
    bad.active_total_mw = 6;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.rx_analog_mw = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("BW_max") {
    const PowerProfile p;
    CHECK(bw_max(p, 16 * KB) == doctest::Approx(131072 / (163.84e-6 + 1.39e-6)));
    CHECK(std::abs(bw_max(p, 16 * KB) / 1e6 - 793) <= 1);
    CHECK(bw_max(p, std::size_t{1} << 40) == doctest::Approx(0.8e9).epsilon(1e-6));
    PowerProfile instant;
    instant.t_warm_s = 0;
    CHECK(bw_max(instant, 16 * KB) == 0.8e9);
    CHECK(bw_max(p, 64 * KB) > bw_max(p, 16 * KB));
}

TEST_CASE("reference curves: lookup and interpolation") {
    const auto& spi = reference_curve("single_spi");
    CHECK(spi.at(50) == doctest::Approx(55.4478584932744));
    CHECK(spi.at(0.001) == doctest::Approx(100));
    // Halfway between two digitized points.
    CHECK(spi.at((9.900802 + 11.250775) / 2) == doctest::Approx((58.1712835504449 + 57.9515425059938) / 2));
    CHECK_THROWS_AS(spi.at(60), CurveOutOfRange);
    CHECK_THROWS_AS(spi.at(0.0005), CurveOutOfRange);
    CHECK(spi.best().bw_mbps == 50);
    CHECK(reference_curve("hyperbus").at(793) == 113.85);
    CHECK_THROWS_AS(reference_curve("uart"), std::invalid_argument);
    for (const auto& c : reference_curves()) {
        for (std::size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].bw_mbps > c.points[i - 1].bw_mbps);
    }
}

TEST_CASE("model agrees with the published SerDes curve") {
    const auto& s = reference_curve("serdes_16kb");
    for (const auto& pt : s.points) {
        const double e = duty_cycle_energy({}, {pt.bw_mbps * 1e6, 16 * KB}).energy_per_bit_pj;
        CHECK_MESSAGE(rel(e, pt.pj_per_bit) < 0.005, pt.bw_mbps << " Mbps");
    }
}

TEST_CASE("peripheral comparison ratios") {
    const PowerProfile p;
    const double bwm = bw_max(p, 16 * KB);
    SUBCASE("single SPI at its best vs SerDes at BW_max") {
        const auto r = compare_peripherals(p, 16 * KB, bwm, "single_spi", Comparison::BestCase);
        CHECK(r.reference_bw_mbps == 50);
        CHECK(r.ratio == doctest::Approx(8.46).epsilon(0.01));
        CHECK(r.serdes_bw_mbps / r.reference_bw_mbps == doctest::Approx(15.9).epsilon(0.01));
    }
    SUBCASE("both at 10 Mbps") {
        const auto r = compare_peripherals(p, 16 * KB, 10e6, "single_spi", Comparison::SameBandwidth);
        CHECK(r.ratio == doctest::Approx(8.61).epsilon(0.01));
        CHECK(r.reference_pj_per_bit == doctest::Approx(58.155).epsilon(1e-4));
    }
    SUBCASE("HyperBus vs SerDes at BW_max") {
        const auto r = compare_peripherals(p, 16 * KB, bwm, "hyperbus", Comparison::SameBandwidth);
        CHECK(r.ratio == doctest::Approx(17.4).epsilon(0.01));
    }
    SUBCASE("octal SPI DDR at its best") {
        const auto r = compare_peripherals(p, 16 * KB, bwm, "octal_spi_ddr", Comparison::BestCase);
        CHECK(r.ratio == doctest::Approx(2.1).epsilon(0.01));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(compare_peripherals(p, 16 * KB, 100e6, "single_spi", Comparison::SameBandwidth), CurveOutOfRange);
        CHECK_THROWS_AS(compare_peripherals(p, 16 * KB, 900e6, "hyperbus", Comparison::SameBandwidth),
                        InfeasibleBandwidth);
    }
}

TEST_CASE("shipped curve files match the built-in data") {
    for (const auto& c : reference_curves()) {
        const std::string path = std::string(C2C_SOURCE_DIR) + "/data/reference_curves/" + c.name + ".csv";
        std::ifstream f(path);
        REQUIRE_MESSAGE(f.good(), path);
        std::stringstream ss;
        ss << f.rdbuf();
        CHECK(ss.str() == c.csv());
        const auto back = parse_reference_curve(c.name, ss.str());
        REQUIRE(back.points.size() == c.points.size());
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            CHECK(back.points[i].bw_mbps == doctest::Approx(c.points[i].bw_mbps).epsilon(1e-12));
            CHECK(back.points[i].pj_per_bit == doctest::Approx(c.points[i].pj_per_bit).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(parse_reference_curve("x", "bw,e\n1,2\n"), std::invalid_argument);
}

TEST_CASE("curve sweep CSV") {
    const auto csv = energy_curves_csv({}, {50, 800}, {16, 0.5});
    CHECK(csv.rfind("bandwidth_mbps,buffer_kb,energy_pj_per_bit\n", 0) == 0);
    CHECK(csv.find("50,16,6.591") != std::string::npos);
    CHECK(csv.find("800,") == std::string::npos);  // infeasible for both buffers
}

TEST_CASE("energy trace against the closed form") {
    const PowerProfile p;
    SUBCASE("one duty cycle at 50 Mbps, 16 KB") {
        const auto r = duty_cycle_energy(p, {50e6, 16 * KB});
        const double j = energy_trace(one_cycle(r), p);
        CHECK(rel(j * 1e12, r.energy_pj) < 0.01);
        CHECK(rel(j * 1e12, r.energy_pj) < 1e-9);
    }
    SUBCASE("idle only") {
        ModeLog log;
        log.end_s = 3e-3;
        CHECK(energy_trace(log, p) == doctest::Approx(2e-6 * 3e-3));
        CHECK(power_up_edges(log) == 0);
    }
    SUBCASE("three power-up edges cost 360 pJ") {
        const auto r = duty_cycle_energy(p, {100e6, 4 * KB});
        ModeLog log;
        for (int k = 0; k < 3; ++k) {
            const auto c = one_cycle(r, k * r.t_cycle);
            log.events.insert(log.events.end(), c.events.begin(), c.events.end());
        }
        log.end_s = 3 * r.t_cycle;
        CHECK(power_up_edges(log) == 3);
        PowerProfile free_switch = p;
        free_switch.pg_overhead_pj = 0;
        CHECK((energy_trace(log, p) - energy_trace(log, free_switch)) * 1e12 == doctest::Approx(360));
        CHECK(energy_trace(log, p) * 1e12 == doctest::Approx(3 * r.energy_pj));
    }
    SUBCASE("warm-up straight back to idle still counts the edge") {
        ModeLog log;
        log.events = {{1e-6, LinkMode::WarmUp}, {2e-6, LinkMode::Idle}};
        log.end_s = 3e-6;
        CHECK(power_up_edges(log) == 1);
    }
    SUBCASE("out-of-order events") {
        ModeLog log;
        log.events = {{2e-6, LinkMode::WarmUp}, {1e-6, LinkMode::Idle}};
        log.end_s = 3e-6;
        CHECK_THROWS_AS(energy_trace(log, p), std::invalid_argument);
    }
}
