#include "c2c/cdr.hpp"
#include "doctest.h"

#include <random>

using namespace c2c;

namespace {

std::array<bool, 8> bits8(const char* s) {
    std::array<bool, 8> a{};
    for (int i = 0; i < 8; ++i) a[i] = s[i] == '1';
    return a;
}

// Training prefix followed by random payload bits.
std::vector<std::uint8_t> link_bits(std::size_t training, std::size_t payload, std::uint64_t seed) {
    auto bits = alternating_bits(training);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < payload; ++i) bits.push_back(rng() & 1u);
    return bits;
}

}  // namespace

TEST_CASE("Alexander phase detector truth table") {
    CHECK(alexander_pd(false, false, true) == PdDecision::Early);
    CHECK(alexander_pd(false, true, true) == PdDecision::Late);
    CHECK(alexander_pd(true, false, true) == PdDecision::None);
    CHECK(alexander_pd(true, true, true) == PdDecision::None);
    for (int v = 0; v < 8; ++v) {
        const bool p = v & 1, e = v & 2, c = v & 4;
        const auto d = alexander_pd(p, e, c);
        CHECK((d == PdDecision::None) == (p == c));
    }
}

TEST_CASE("pd_batch counts") {
    const auto alt = bits8("01010101");
    SUBCASE("edges equal to the preceding bit: all early") {
        std::array<bool, 8> edge{};
        for (int i = 1; i < 8; ++i) edge[i] = alt[i - 1];
        edge[0] = true;  // previous batch ended in 1
        CHECK(pd_batch(alt, edge, true) == 8);
        CHECK(pd_batch(alt, edge, false) == 7);  // no transition across the boundary
        CHECK(pd_batch(alt, edge, true, false) == 7);
    }
    SUBCASE("edges equal to the following bit: all late") {
        const auto edge = alt;
        CHECK(pd_batch(alt, edge, true) == -8);
        CHECK(pd_batch(alt, edge, true, false) == -7);
    }
    SUBCASE("constant data") {
        const auto ones = bits8("11111111");
        CHECK(pd_batch(ones, bits8("01010101"), true) == 0);
    }
    SUBCASE("bounded") {
        std::mt19937 rng(1);
        for (int t = 0; t < 10000; ++t) {
            std::array<bool, 8> d{}, e{};
            for (int i = 0; i < 8; ++i) {
                d[i] = rng() & 1u;
                e[i] = rng() & 1u;
            }
            const bool last = rng() & 1u;
            CHECK(std::abs(pd_batch(d, e, last)) <= 8);
            CHECK(std::abs(pd_batch(d, e, last, false)) <= 7);
        }
    }
}

TEST_CASE("divider loop filter") {
    SUBCASE("N=4, four sums of +4") {
        CdrState s;
        s.n = 4;
        CHECK(loop_filter_update(s, 4) == 0);
        CHECK(loop_filter_update(s, 4) == 0);
        CHECK(loop_filter_update(s, 4) == 0);
        CHECK(loop_filter_update(s, 4) == 4);
        CHECK(s.accumulator == 0);
    }
    SUBCASE("remainder is carried, quotient truncates toward zero") {
        CdrState s;
        s.n = 4;
        for (int v : {1, 1, 1}) CHECK(loop_filter_update(s, v) == 0);
        CHECK(loop_filter_update(s, 2) == 1);
        CHECK(s.accumulator == 1);
        for (int v : {-2, -2, -2}) CHECK(loop_filter_update(s, v) == 0);
        CHECK(loop_filter_update(s, -2) == -1);  // acc -7 -> -1, remainder -3
        CHECK(s.accumulator == -3);
    }
    SUBCASE("zero sums never step") {
        CdrState s;
        for (int i = 0; i < 1000; ++i) CHECK(loop_filter_update(s, 0) == 0);
    }
    SUBCASE("N=4 evaluates every 16 fast-clock cycles") {
        CHECK(evaluation_cycles(4) == 16);
        CdrState s;
        s.n = 4;
        for (int b = 1; b <= 40; ++b) {
            const int step = loop_filter_update(s, 8);
            CHECK((step != 0) == (b * kCyclesPerBatch % 16 == 0));
        }
    }
}

TEST_CASE("divider values") {
    for (int n = 1; n <= 128; n *= 2) CHECK(valid_divider(n));
    CHECK_FALSE(valid_divider(0));
    CHECK_FALSE(valid_divider(3));
    CHECK_FALSE(valid_divider(256));
}

TEST_CASE("phase interpolator wraps and keeps the unwrapped position") {
    CHECK(kPiStepPs == doctest::Approx(78.125));
    CdrState s;
    s.pi_code = 31;
    pi_apply(s, 1);
    CHECK(s.pi_code == 0);
    pi_apply(s, -1);
    CHECK(s.pi_code == 31);
    CHECK(s.phase_steps == 0);
    pi_apply(s, 40);
    CHECK(s.pi_code == 7);
    CHECK(s.phase_steps == 40);
}

TEST_CASE("slew capacity against a 0.4% offset") {
    const double demand = 0.004;
    // Seven steps of 1/32 UI every 32 UI.
    const double nominal = max_slew_ui_per_ui(4, 7, 1.0 / 32);
    CHECK(nominal == doctest::Approx(7.0 / 32 / 32));
    CHECK(nominal == doctest::Approx(0.0068).epsilon(0.01));
    CHECK(nominal > demand);
    // With the 78.125 ps step the model actually has twice that.
    const double model = max_slew_ui_per_ui(4, kMaxStepsPerEvaluation, kPiStepPs / kUiPs);
    CHECK(model == doctest::Approx(7.0 / 16 / 32));
    CHECK(model >= nominal);
}

TEST_CASE("proportional-integral filter") {
    SUBCASE("same cadence as the divider") {
        CdrState s;
        s.n = 4;
        for (int b = 1; b <= 40; ++b) {
            const int step = pi_filter_update(s, 3, 4);
            CHECK((step != 0) == (b % 4 == 0));
        }
    }
    SUBCASE("alternating decisions leave the frequency register alone") {
        CdrState s;
        s.n = 1;
        for (int i = 0; i < 100; ++i) {
            const int step = pi_filter_update(s, i % 2 ? 5 : -5, 4);
            CHECK(std::abs(step) == 1);
        }
        CHECK(s.freq == 0);
    }
    SUBCASE("persistent error builds frequency up to the step limit") {
        CdrState s;
        s.n = 1;
        int step = 0;
        for (int i = 0; i < 200; ++i) step = pi_filter_update(s, 2, 4);
        CHECK(step == kMaxStepsPerEvaluation);
        CHECK(s.freq == (kMaxStepsPerEvaluation - 1) * 4);
    }
}

TEST_CASE("negative feedback: the detectors oppose a constant phase error") {
    ChannelConfig ch;
    const double d_cross = crossing_delay_ps(ch);
    for (double err_ui : {-0.3, -0.1, -0.05, 0.05, 0.1, 0.3}) {
        int agree = 0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            StreamingLine line(ch, kUiPs, 0.0, seed);
            std::mt19937_64 rng(seed);
            for (int i = 0; i < 2000; ++i) line.push(rng() & 1u);
            long total = 0;
            bool last = false;
            for (int b = 0; b < 50; ++b) {
                std::array<bool, 8> d{}, e{};
                for (int i = 0; i < 8; ++i) {
                    const double td = d_cross + (8 * b + i + 10.5 + err_ui) * kUiPs;
                    e[i] = sample(line, td - kUiPs / 2, ch, rng);
                    d[i] = sample(line, td, ch, rng);
                }
                total += pd_batch(d, e, last);
                last = d[7];
            }
            // Late sampling (positive error) must pull the phase earlier.
            if ((total < 0) == (err_ui > 0) && total != 0) ++agree;
        }
        CHECK_MESSAGE(agree == 20, "error " << err_ui);
    }
}

TEST_CASE("aligned noiseless start: lock at t=0, no steps") {
    RecoveryConfig cfg;
    cfg.channel.noise_sigma = 0;
    cfg.channel.rj_sigma_ps = 0;
    cfg.channel.trace_length_cm = 0;
    // Edge samples land exactly on the crossings and tie to 0, which reads
    // rising edges as early and falling ones as late. Starting with a 1 gives
    // every batch four of each, the idle-to-first-bit edge included.
    auto bits = alternating_bits(20000);
    for (auto& b : bits) b ^= 1u;
    const auto r = recover_stream(bits, cfg);
    REQUIRE(r.lock_time_ns.has_value());
    CHECK(*r.lock_time_ns == 0.0);
    CHECK(r.pi_steps_issued == 0);
    CHECK(r.bit_errors == 0);

    // Through the 2 cm low-pass the start-up transient costs a step or two.
    cfg.channel.trace_length_cm = 2;
    const auto f = recover_stream(bits, cfg);
    REQUIRE(f.lock_time_ns.has_value());
    CHECK(*f.lock_time_ns == 0.0);
    CHECK(f.pi_steps_issued <= 2);
}

TEST_CASE("lock from the worst initial phase within 0.64 us") {
    for (double phase : {0.5, -0.5, 1.0, 0.49, -0.49, 0.25}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            RecoveryConfig cfg;
            cfg.initial_phase_ui = phase;
            cfg.seed = seed;
            const auto r = recover_stream(link_bits(4000, 20000, seed), cfg);
            REQUIRE_MESSAGE(r.lock_time_ns.has_value(), "phase " << phase);
            CHECK_MESSAGE(*r.lock_time_ns <= 640.0, "phase " << phase << " lock " << *r.lock_time_ns);
            CHECK(r.bit_errors == 0);
        }
    }
}

TEST_CASE("0.4% offset: 1e6 bits without errors or slips") {
    for (double offset : {0.004, -0.004}) {
        RecoveryConfig cfg;
        cfg.freq_offset = offset;
        cfg.initial_phase_ui = 0.5;
        cfg.check_from_bit = 4000;
        const auto r = recover_stream(link_bits(4000, 1000000, 7), cfg);
        CHECK_FALSE(r.loss_of_lock);
        CHECK(r.bits_checked >= 995000);
        CHECK(r.bit_errors == 0);
    }
}

TEST_CASE("2% offset exceeds the tracking range") {
    RecoveryConfig cfg;
    cfg.freq_offset = 0.02;
    cfg.check_from_bit = 4000;
    CHECK_THROWS_AS(recover_stream(link_bits(4000, 100000, 8), cfg), LossOfLock);
}

TEST_CASE("divider-only filter: tracks, but dithers by several steps at lock") {
    RecoveryConfig cfg;
    cfg.filter = LoopFilterKind::Divider;
    cfg.initial_phase_ui = 0.5;
    cfg.check_from_bit = 4000;
    const auto r = recover_stream(link_bits(4000, 100000, 9), cfg);
    CHECK(r.bit_errors == 0);
    double worst = 0;
    for (std::size_t i = r.trace.size() / 2; i < r.trace.size(); ++i) {
        worst = std::max(worst, std::abs(r.trace[i].phase_error_ui));
    }
    CHECK(worst > 4 * kPiStepPs / kUiPs);
    CHECK_FALSE(r.lock_time_ns.has_value());
}

TEST_CASE("identical seeds give identical traces") {
    RecoveryConfig cfg;
    cfg.freq_offset = 0.002;
    cfg.initial_phase_ui = 0.3;
    const auto bits = link_bits(2000, 20000, 4);
    const auto a = recover_stream(bits, cfg), b = recover_stream(bits, cfg);
    CHECK(a.trace_csv() == b.trace_csv());
    CHECK(a.bits == b.bits);
    CHECK(a.trace_csv().rfind("time_ns,pi_code,phase_error_ui\n", 0) == 0);
    cfg.seed = 2;
    CHECK(recover_stream(bits, cfg).trace_csv() != a.trace_csv());
}

TEST_CASE("bad divider is rejected") {
    RecoveryConfig cfg;
    cfg.n = 3;
    CHECK_THROWS_AS(recover_stream(alternating_bits(100), cfg), std::invalid_argument);
}
