// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "c2c/cdr.hpp"
#include "c2c/codec.hpp"
#include "c2c/datapath.hpp"
#include "c2c/energy.hpp"
#include "c2c/node.hpp"
#include "c2c/phy.hpp"
#include "c2c/scenario.hpp"
#include "reference_8b10b.hpp"
#include "reference_grid.hpp"

using namespace c2c;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream note;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) note << "failed: " << what << "; ";
        ok = ok && cond;
    }
};

bool near(double x, double target, double rel) { return std::abs(x / target - 1.0) <= rel; }

// ---------------------------------------------------------------------------

void energy_fidelity(Check& c) {
    const PowerProfile p;
    double worst = 0;
    for (std::size_t i = 0; i < testdata::kGridBwMbps.size(); ++i) {
        for (std::size_t j = 0; j < testdata::kGridBufferKb.size(); ++j) {
            DutyCycleConfig cfg{testdata::kGridBwMbps[i] * 1e6,
                                static_cast<std::size_t>(testdata::kGridBufferKb[j] * 1024)};
            const double e = duty_cycle_energy(p, cfg).energy_per_bit_pj;
            worst = std::max(worst, std::abs(e / testdata::kGridPj[i][j] - 1));
        }
    }
    c.expect(worst <= 0.005, "40-point grid within 0.5%");
    auto at = [&](double mbps, double kb) {
        return duty_cycle_energy(p, {mbps * 1e6, static_cast<std::size_t>(kb * 1024)}).energy_per_bit_pj;
    };
    const double a = at(50, 16), b = at(50, 0.5), d = at(600, 64);
    c.expect(near(a, 6.591, 0.005) && near(b, 8.254, 0.005) && near(d, 6.514, 0.005), "spot values");
    c.note << "worst grid error " << worst * 100 << "%, spots " << a << " / " << b << " / " << d << " pJ/bit";
}

void headline_numbers(Check& c) {
    const PowerProfile p;
    const std::size_t buf = 16 * 1024;
    const double cont = continuous_energy(p);
    const double bwm = bw_max(p, buf);
    c.expect(near(cont, 6.5, 1e-9), "continuous 6.5 pJ/bit");
    c.expect(p.active_mw() == 5.2 && std::abs(p.block_sum_mw() - 5.2) < 0.005, "5.2 mW total");
    c.expect(std::abs(bwm / 1e6 - 793) <= 1, "BW_max 793 +- 1 Mbps");
    const double r1 = compare_peripherals(p, buf, bwm, "single_spi", Comparison::BestCase).ratio;
    const double r2 = compare_peripherals(p, buf, 10e6, "single_spi", Comparison::SameBandwidth).ratio;
    const double r3 = compare_peripherals(p, buf, bwm, "hyperbus", Comparison::SameBandwidth).ratio;
    c.expect(near(r1, 8.46, 0.01), "8.46x vs single SPI best case");
    c.expect(near(r2, 8.61, 0.01), "8.61x at 10 Mbps");
    c.expect(near(r3, 17.4, 0.01), "17.4x vs HyperBus at BW_max");
    c.note << cont << " pJ/bit, " << p.active_mw() << " mW, BW_max " << bwm / 1e6 << " Mbps, ratios " << r1 << " / "
           << r2 << " / " << r3;
}

void codec_correctness(Check& c) {
    using testing::reference_encode;
    int rows = 0, mismatches = 0, roundtrip = 0;
    for (const auto& row : code_table()) {
        const auto ref = reference_encode(row.byte, row.is_control, row.rd_in == RunningDisparity::Positive);
        std::string w;
        for (int i = 0; i < 10; ++i) w += row.code.bit(i) ? '1' : '0';
        if (w != ref.wire || (row.rd_out == RunningDisparity::Positive) != ref.rd_positive_after) ++mismatches;
        const auto d = decode_symbol(row.code, row.rd_in);
        if (d.symbol == SymbolClass{row.byte, row.is_control} && d.rd == row.rd_out) ++roundtrip;
        ++rows;
    }
    const int expected = 2 * (256 + static_cast<int>(supported_control_bytes().size()));
    c.expect(rows == expected, "table covers all bytes and K-characters at both disparities");
    c.expect(mismatches == 0, "reference table agreement");
    c.expect(roundtrip == rows, "decode inverts encode");

    std::mt19937 rng(3);
    LaneDisparity rd = all_negative();
    int rds = -1, lo = 0, hi = 0;
    for (int i = 0; i < 100000; ++i) {
        const auto e = encode_flit(FlitKind::Data, static_cast<std::uint32_t>(rng()), rd);
        rd = e.rd;
        const auto bits = e.flit.bits();
        for (int k = 0; k < kFlitBits; ++k) {
            rds += ((bits >> k) & 1u) ? 1 : -1;
            lo = std::min(lo, rds);
            hi = std::max(hi, rds);
        }
    }
    c.expect(lo >= -3 && hi <= 3, "running digital sum bounded");
    c.note << rows << " codes, " << mismatches << " mismatches, RDS in [" << lo << ", " << hi << "] over 1e5 flits";
}

void datapath_inverse(Check& c) {
    std::mt19937_64 rng(4);
    for (bool odd : {false, true}) {
        Serializer ser;
        Deserializer des;
        TimingSynchronizer sync;
        sync.set_shift(odd);
        std::vector<std::uint64_t> sent;
        std::size_t received = 0, bad = 0;
        bool carry = false, first = true;
        for (int f = 0; f < 10000; ++f) {
            sent.push_back(rng() & ((1ull << 40) - 1));
            ser.load(sent.back());
            for (int i = 0; i < kPairsPerFlit; ++i) {
                auto p = ser.step().pair;
                if (odd) {  // the channel delays everything by one bit
                    const BitPair delayed{carry, p.even};
                    carry = p.odd;
                    p = delayed;
                }
                const auto aligned = sync.step(p);
                if (odd && first) {
                    first = false;
                    continue;
                }
                if (auto w = des.step(aligned)) {
                    if (received >= sent.size() || *w != sent[received]) ++bad;
                    ++received;
                }
            }
        }
        const std::size_t want = odd ? sent.size() - 1 : sent.size();
        c.expect(bad == 0 && received == want, odd ? "odd alignment via shift" : "even alignment");
        c.note << (odd ? "odd" : "even") << ": " << received << " flits, " << bad << " wrong; ";
    }
}

void cdr_behavior(Check& c) {
    // (a) cadence
    ChannelConfig quiet;
    quiet.noise_sigma = 0;
    quiet.rj_sigma_ps = 0;
    StreamingLine line(quiet, kUiPs, 0, 1);
    for (int i = 0; i < 4000; ++i) line.push(i & 1);
    CdrEngine eng(quiet, 4, LoopFilterKind::ProportionalIntegral, 4, true, 1);
    std::vector<int> evals;
    for (int k = 0; k < 1000; ++k) {
        if (eng.cycle(line, 500.0 + k * 2 * kUiPs).evaluated) evals.push_back(k);
    }
    bool cadence = evaluation_cycles(4) == 16 && evals.size() > 2;
    for (std::size_t i = 1; i < evals.size(); ++i) cadence = cadence && evals[i] - evals[i - 1] == 16;
    c.expect(cadence, "evaluation every 16 fast-clock cycles");

    // (b) lock from the worst initial phase
    auto link = [](std::size_t training, std::size_t payload, std::uint64_t seed) {
        auto bits = alternating_bits(training);
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < payload; ++i) bits.push_back(rng() & 1u);
        return bits;
    };
    double worst_lock = 0;
    bool locked = true;
    for (double phase : {0.5, -0.5}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            RecoveryConfig cfg;
            cfg.initial_phase_ui = phase;
            cfg.seed = seed;
            const auto r = recover_stream(link(4000, 20000, seed), cfg);
            locked = locked && r.lock_time_ns.has_value() && r.bit_errors == 0;
            if (r.lock_time_ns) worst_lock = std::max(worst_lock, *r.lock_time_ns);
        }
    }
    c.expect(locked && worst_lock <= 640.0, "lock within 0.64 us");

    // (c) 1e6 bits at +-0.4%
    std::int64_t errors = 0, checked = 0;
    bool slipped = false;
    for (double off : {0.004, -0.004}) {
        RecoveryConfig cfg;
        cfg.freq_offset = off;
        cfg.initial_phase_ui = 0.5;
        cfg.check_from_bit = 4000;
        cfg.throw_on_loss = false;
        const auto r = recover_stream(link(4000, 1010000, 7), cfg);
        errors += r.bit_errors;
        checked = std::min(checked == 0 ? r.bits_checked : checked, r.bits_checked);
        slipped = slipped || r.loss_of_lock;
    }
    c.expect(!slipped && errors == 0 && checked >= 1000000, "zero errors over 1e6 bits at 0.4% offset");

    // (d) slew capacity, exact: 7 steps of 1/32 UI per 32 UI is 7/1024 > 4/1000
    const bool exact = 7 * 1000 > 4 * 1024 && max_slew_ui_per_ui(4, 7, 1.0 / 32) == 7.0 / 1024;
    c.expect(exact, "slew capacity 7/1024 UI/UI > 0.004");
    c.note << "cadence " << (evals.size() > 1 ? evals[1] - evals[0] : 0) << " cycles, worst lock " << worst_lock
           << " ns, " << errors << " errors in " << checked << "+ bits per offset, capacity " << 7.0 / 1024;
}

std::string first(const TransferReport& r, const std::string& node, const std::string& sig, const std::string& v,
                  SimTime& t) {
    for (const auto& e : r.events) {
        if (e.node == node && e.signal == sig && e.value == v) {
            t = e.t;
            return {};
        }
    }
    t = -1;
    return node + " " + sig + "=" + v + " missing";
}

void end_to_end(Check& c) {
    const auto payload = random_payload(16384, 1);
    for (auto sc : {Scenario::TxInitiated, Scenario::RxInitiated}) {
        ProtocolConfig cfg;
        cfg.scenario = sc;
        const auto r = run_protocol(cfg, payload);
        c.expect(r.received == payload && r.decode_errors == 0, std::string(to_string(sc)) + " byte-exact");
        c.expect(std::abs(r.programming_latency_ns / 750 - 1) <= 0.2, std::string(to_string(sc)) + " latency");
        SimTime a, b, d, e, f;
        bool order = true;
        if (sc == Scenario::TxInitiated) {
            // TX raises GPIO0, RX clock comes up, RX raises GPIO1, only then TX comm_en
            first(r, "tx", "gpio0", "1", a);
            first(r, "rx", "rx_clock_ready", "1", b);
            first(r, "rx", "gpio1", "1", d);
            first(r, "tx", "comm_en", "1", e);
            first(r, "tx", "warm_en", "1", f);
            order = a >= 0 && f >= 0 && f <= a && a < b && b < d && d < e;
        } else {
            first(r, "rx", "gpio1", "1", a);
            first(r, "tx", "gpio0", "1", b);
            first(r, "rx", "comm_en", "1", d);
            first(r, "rx", "gpio1", "0", e);
            first(r, "tx", "comm_en", "1", f);
            order = a >= 0 && a < b && b < d && d < e && e < f;
        }
        const auto starts = r.find("rx", "start_detected");
        const SimTime start = starts.empty() ? -1 : starts.front().t;
        SimTime tx_comm;
        first(r, "tx", "comm_en", "1", tx_comm);
        order = order && start > tx_comm;
        c.expect(order, std::string(to_string(sc)) + " GPIO ordering");
        c.note << to_string(sc) << ": " << r.delivered_bytes << " B, latency " << r.programming_latency_ns << " ns; ";
    }
}

void eye_diagrams(Check& c) {
    auto height = [](double cm, double noise, std::uint64_t seed) {
        ChannelConfig ch;
        ch.trace_length_cm = cm;
        if (noise >= 0) ch.noise_sigma = noise;
        std::mt19937_64 rng(seed);
        std::vector<std::uint8_t> bits(200);
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
        std::mt19937_64 nrng(seed);
        return eye_capture(channel_apply(drive(bits, ch), ch, nrng)).eye_height_v;
    };
    const double h2 = height(2, -1, 11), h5 = height(5, -1, 11);
    c.expect(near(h2, 0.418, 0.05), "2 cm eye 0.418 V");
    c.expect(near(h5, 0.386, 0.05), "5 cm eye 0.386 V");
    double prev = 1e9;
    bool mono_len = true;
    for (double cm : {0.0, 1.0, 2.0, 3.0, 5.0, 8.0}) {
        const double h = height(cm, 0, 5);
        mono_len = mono_len && h <= prev + 1e-12;
        prev = h;
    }
    prev = 1e9;
    bool mono_noise = true;
    for (double n : {0.0, 0.002, 0.005, 0.01, 0.02}) {
        const double h = height(2, n, 5);
        mono_noise = mono_noise && h <= prev + 1e-12;
        prev = h;
    }
    c.expect(mono_len, "non-increasing in length");
    c.expect(mono_noise, "non-increasing in noise");
    c.note << "2 cm " << h2 << " V, 5 cm " << h5 << " V";
}

void determinism(Check& c) {
    const auto cfg = parse_config("[run]\nfreq_offset = 0.003\nscenario = rx-initiated\n[ber]\nn_bits = 50000\n");
    using Cmd = std::function<CommandResult()>;
    const std::vector<std::pair<const char*, Cmd>> cmds = {
        {"run", [&] { return cmd_run(cfg); }},
        {"eye", [&] { return cmd_eye(cfg); }},
        {"energy", [&] { return cmd_energy(cfg, "all"); }},
        {"ber", [&] { return cmd_ber(cfg); }},
        {"lock", [&] { return cmd_lock(cfg); }},
    };
    std::size_t files = 0;
    for (const auto& [name, cmd] : cmds) {
        const auto a = cmd(), b = cmd();
        bool same = a.summary == b.summary && a.exit_code == b.exit_code && a.artifacts.size() == b.artifacts.size();
        for (std::size_t i = 0; same && i < a.artifacts.size(); ++i) same = a.artifacts[i].content == b.artifacts[i].content;
        files += a.artifacts.size();
        c.expect(same, std::string(name) + " reproducible");
    }
    c.note << files << " artifacts compared byte for byte across 5 commands";
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;  // 0: no limit
        void (*fn)(Check&);
    };
    const Criterion all[] = {
        {"energy model fidelity", 1, energy_fidelity},
        {"headline numbers", 0, headline_numbers},
        {"codec correctness", 10, codec_correctness},
        {"datapath inverse", 10, datapath_inverse},
        {"CDR behavior", 60, cdr_behavior},
        {"end-to-end protocol", 60, end_to_end},
        {"eye diagrams", 30, eye_diagrams},
        {"determinism", 0, determinism},
    };
    int failed = 0, n = 0;
    for (const auto& k : all) {
        ++n;
        Check c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            k.fn(c);
        } catch (const std::exception& e) {
            c.ok = false;
            c.note << "exception: " << e.what();
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (k.budget_s > 0 && s > k.budget_s) {
            c.ok = false;
            c.note << "; over the " << k.budget_s << " s budget";
        }
        std::printf("%s %d. %s (%.2f s): %s\n", c.ok ? "PASS" : "FAIL", n, k.name, s, c.note.str().c_str());
        failed += !c.ok;
    }
    std::printf("%d of %d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
