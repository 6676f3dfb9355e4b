#include "c2c/scenario.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "c2c/cdr.hpp"
#include "c2c/energy.hpp"
#include "c2c/phy.hpp"

namespace c2c {

ConfigError::ConfigError(int l, const std::string& what)
    : std::runtime_error(l > 0 ? "line " + std::to_string(l) + ": " + what : what), line(l) {}

namespace {

// ---------------------------------------------------------------------------
// Value codecs

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
    double x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x)) throw std::invalid_argument("expected a number");
    return x;
}

std::uint64_t to_u64(const std::string& v) {
    std::uint64_t x = 0;
    int base = 10;
    std::string_view s = v;
    if (s.starts_with("0x") || s.starts_with("0X")) {
        s.remove_prefix(2);
        base = 16;
    }
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x, base);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("expected a non-negative integer");
    return x;
}

int to_int(const std::string& v) {
    int x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) throw std::invalid_argument("expected an integer");
    return x;
}

bool to_bool(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw std::invalid_argument("expected true or false");
}

std::vector<double> to_list(const std::string& v) {
    std::vector<double> out;
    if (v.empty()) return out;
    std::string_view s = v;
    while (true) {
        const auto comma = s.find(',');
        out.push_back(to_double(trim(s.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
std::string fmt(bool b) { return b ? "true" : "false"; }
std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
}

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// ---------------------------------------------------------------------------
// Key table

struct Key {
    std::string section, name;
    std::function<void(ScenarioConfig&, const std::string&)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

template <typename Get>
Key num(std::string sec, std::string name, Get get, std::function<bool(double)> ok = {}, const char* msg = "") {
    return {std::move(sec), std::move(name),
            [get, ok, msg](ScenarioConfig& c, const std::string& v) {
                const double x = to_double(v);
                if (ok) require(ok(x), msg);
                get(c) = x;
            },
            [get](const ScenarioConfig& c) { return fmt(static_cast<double>(get(const_cast<ScenarioConfig&>(c)))); }};
}

template <typename T, typename Get>
Key integer(std::string sec, std::string name, Get get, long long lo, long long hi) {
    return {std::move(sec), std::move(name),
            [get, lo, hi](ScenarioConfig& c, const std::string& v) {
                const auto x = to_u64(v);
                if (static_cast<long long>(x) < lo || x > static_cast<std::uint64_t>(hi) || x > (1ull << 62))
                    throw std::invalid_argument("integer out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
                get(c) = static_cast<T>(x);
            },
            [get](const ScenarioConfig& c) { return std::to_string(get(const_cast<ScenarioConfig&>(c))); }};
}

template <typename Get>
Key flag(std::string sec, std::string name, Get get) {
    return {std::move(sec), std::move(name), [get](ScenarioConfig& c, const std::string& v) { get(c) = to_bool(v); },
            [get](const ScenarioConfig& c) { return fmt(static_cast<bool>(get(const_cast<ScenarioConfig&>(c)))); }};
}

template <typename Get>
Key list(std::string sec, std::string name, Get get) {
    return {std::move(sec), std::move(name),
            [get](ScenarioConfig& c, const std::string& v) {
                auto l = to_list(v);
                for (double x : l) require(x > 0, "list entries must be positive");
                get(c) = std::move(l);
            },
            [get](const ScenarioConfig& c) { return fmt_list(get(const_cast<ScenarioConfig&>(c))); }};
}

bool positive(double x) { return x > 0; }
bool non_negative(double x) { return x >= 0; }

const std::vector<Key>& keys() {
    static const std::vector<Key> k = [] {
        constexpr long long kBig = 1ll << 40;
        std::vector<Key> v;
        // [run]
        v.push_back({"run", "scenario",
                     [](ScenarioConfig& c, const std::string& s) {
                         if (s == "tx-initiated") c.protocol.scenario = Scenario::TxInitiated;
                         else if (s == "rx-initiated") c.protocol.scenario = Scenario::RxInitiated;
                         else throw std::invalid_argument("expected tx-initiated or rx-initiated");
                     },
                     [](const ScenarioConfig& c) { return std::string(to_string(c.protocol.scenario)); }});
        v.push_back(integer<std::uint64_t>("run", "seed", [](ScenarioConfig& c) -> auto& { return c.protocol.seed; }, 0, kBig));
        v.push_back(integer<std::size_t>("run", "payload_bytes", [](ScenarioConfig& c) -> auto& { return c.payload_bytes; }, 4, kBig));
        v.push_back(integer<std::uint64_t>("run", "payload_seed", [](ScenarioConfig& c) -> auto& { return c.payload_seed; }, 0, kBig));
        v.push_back(num("run", "freq_offset", [](ScenarioConfig& c) -> auto& { return c.protocol.freq_offset; },
                        [](double x) { return std::abs(x) < 0.25; }, "frequency offset must be below 25%"));
        v.push_back({"run", "fast_clock_mhz",
                     [](ScenarioConfig&, const std::string& s) {
                         require(to_double(s) == 400.0, "only the 400 MHz fast clock is modeled");
                     },
                     [](const ScenarioConfig&) { return std::string("400"); }});
        v.push_back({"run", "cpu_clock_mhz",
                     [](ScenarioConfig& c, const std::string& s) {
                         const double x = to_double(s);
                         require(x > 0, "clock must be positive");
                         c.protocol.cpu_clock_hz = x * 1e6;
                     },
                     [](const ScenarioConfig& c) { return fmt(c.protocol.cpu_clock_hz / 1e6); }});
        // [channel]
        auto ch = [](auto member) {
            return [member](ScenarioConfig& c) -> auto& { return c.protocol.channel.*member; };
        };
        v.push_back(num("channel", "swing_v", ch(&ChannelConfig::swing), positive, "swing must be positive"));
        v.push_back(num("channel", "trace_length_cm", ch(&ChannelConfig::trace_length_cm), non_negative, "length must be >= 0"));
        v.push_back(num("channel", "prop_delay_ps", ch(&ChannelConfig::prop_delay_ps), non_negative, "delay must be >= 0"));
        v.push_back(num("channel", "noise_sigma_v", ch(&ChannelConfig::noise_sigma), non_negative, "sigma must be >= 0"));
        v.push_back(num("channel", "rj_sigma_ps", ch(&ChannelConfig::rj_sigma_ps), non_negative, "sigma must be >= 0"));
        v.push_back(num("channel", "rise_time_ui", ch(&ChannelConfig::rise_time_ui),
                        [](double x) { return x >= 0 && x <= 1; }, "rise time must be within [0, 1] UI"));
        v.push_back(integer<int>("channel", "samples_per_ui", ch(&ChannelConfig::samples_per_ui), 2, 4096));
        v.push_back(num("channel", "comparator_offset_v", ch(&ChannelConfig::comparator_offset)));
        v.push_back(flag("channel", "tie_value", ch(&ChannelConfig::tie_value)));
        v.push_back(num("channel", "tau_override_ps", ch(&ChannelConfig::tau_override_ps)));
        // [cdr]
        v.push_back({"cdr", "n",
                     [](ScenarioConfig& c, const std::string& s) {
                         const int n = to_int(s);
                         require(valid_divider(n), "N must be a power of two from 1 to 128");
                         c.protocol.cdr_n = n;
                     },
                     [](const ScenarioConfig& c) { return std::to_string(c.protocol.cdr_n); }});
        v.push_back({"cdr", "filter",
                     [](ScenarioConfig& c, const std::string& s) {
                         if (s == "proportional-integral") c.protocol.filter = LoopFilterKind::ProportionalIntegral;
                         else if (s == "divider") c.protocol.filter = LoopFilterKind::Divider;
                         else throw std::invalid_argument("expected proportional-integral or divider");
                     },
                     [](const ScenarioConfig& c) { return std::string(to_string(c.protocol.filter)); }});
        v.push_back(integer<int>("cdr", "integral_k", [](ScenarioConfig& c) -> auto& { return c.protocol.integral_k; }, 1, 1024));
        v.push_back(flag("cdr", "boundary_detector", [](ScenarioConfig& c) -> auto& { return c.boundary_detector; }));
        v.push_back(num("cdr", "rx_phase_ps", [](ScenarioConfig& c) -> auto& { return c.protocol.rx_phase_ps; },
                        [](double x) { return x < 2500; }, "phase must be below 2500 ps (negative: from seed)"));
        v.push_back(integer<int>("cdr", "ready_evaluations",
                                 [](ScenarioConfig& c) -> auto& { return c.protocol.rx_ready_evaluations; }, 1, 1 << 20));
        // [node]
        auto pc = [](auto member) { return [member](ScenarioConfig& c) -> auto& { return c.protocol.*member; }; };
        v.push_back(integer<std::size_t>("node", "memory_bytes", pc(&ProtocolConfig::memory_bytes), 4, kBig));
        v.push_back(integer<std::uint32_t>("node", "tx_addr", pc(&ProtocolConfig::tx_addr), 0, UINT32_MAX));
        v.push_back(integer<std::uint32_t>("node", "rx_addr", pc(&ProtocolConfig::rx_addr), 0, UINT32_MAX));
        v.push_back(integer<int>("node", "fifo_depth", pc(&ProtocolConfig::fifo_depth), 2, 1 << 16));
        v.push_back(integer<int>("node", "fifo_latency_cycles", pc(&ProtocolConfig::fifo_latency_cycles), 0, 1 << 16));
        v.push_back(flag("node", "literal_rx_init_wait", pc(&ProtocolConfig::literal_rx_init_wait)));
        v.push_back(num("node", "watchdog_factor", pc(&ProtocolConfig::watchdog_factor),
                        [](double x) { return x >= 1; }, "watchdog factor must be >= 1"));
        // [costs], CPU cycles per program line kind
        auto cost = [](auto member) { return [member](ScenarioConfig& c) -> auto& { return c.protocol.costs.*member; }; };
        v.push_back(integer<int>("costs", "gpio_dir", cost(&ProgramCosts::gpio_dir), 0, 1 << 20));
        v.push_back(integer<int>("costs", "prepare", cost(&ProgramCosts::prepare), 0, 1 << 20));
        v.push_back(integer<int>("costs", "reg_write", cost(&ProgramCosts::reg_write), 0, 1 << 20));
        v.push_back(integer<int>("costs", "dma_setup", cost(&ProgramCosts::dma_setup), 0, 1 << 20));
        v.push_back(integer<int>("costs", "gpio_write", cost(&ProgramCosts::gpio_write), 0, 1 << 20));
        v.push_back(integer<int>("costs", "irq_latency", cost(&ProgramCosts::irq_latency), 0, 1 << 20));
        v.push_back(integer<int>("costs", "poll", cost(&ProgramCosts::poll), 1, 1 << 20));
        // [power]
        auto pw = [](auto member) { return [member](ScenarioConfig& c) -> auto& { return c.protocol.power.*member; }; };
        v.push_back(num("power", "rx_analog_mw", pw(&PowerProfile::rx_analog_mw), non_negative, "power must be >= 0"));
        v.push_back(num("power", "tx_analog_mw", pw(&PowerProfile::tx_analog_mw), non_negative, "power must be >= 0"));
        v.push_back(num("power", "rx_dig_datacomm_mw", pw(&PowerProfile::rx_dig_datacomm_mw), non_negative, "power must be >= 0"));
        v.push_back(num("power", "rx_dig_warm_mw", pw(&PowerProfile::rx_dig_warm_mw), non_negative, "power must be >= 0"));
        v.push_back(num("power", "tx_dig_active_mw", pw(&PowerProfile::tx_dig_active_mw), non_negative, "power must be >= 0"));
        v.push_back(num("power", "dig_standby_mw", pw(&PowerProfile::dig_standby_mw), non_negative, "power must be >= 0"));
        v.push_back(num("power", "active_total_mw", pw(&PowerProfile::active_total_mw), non_negative, "power must be >= 0"));
        v.push_back(num("power", "pg_overhead_pj", pw(&PowerProfile::pg_overhead_pj), non_negative, "energy must be >= 0"));
        v.push_back({"power", "t_warm_us",
                     [](ScenarioConfig& c, const std::string& s) {
                         const double x = to_double(s);
                         require(x >= 0, "warm-up time must be >= 0");
                         c.protocol.power.t_warm_s = x * 1e-6;
                     },
                     [](const ScenarioConfig& c) { return fmt(c.protocol.power.t_warm_s * 1e6); }});
        // [energy]
        v.push_back(list("energy", "bandwidths_mbps", [](ScenarioConfig& c) -> auto& { return c.energy.bandwidths_mbps; }));
        v.push_back(list("energy", "buffers_kb", [](ScenarioConfig& c) -> auto& { return c.energy.buffers_kb; }));
        v.push_back(num("energy", "buffer_kb", [](ScenarioConfig& c) -> auto& { return c.energy.buffer_kb; }, positive,
                        "buffer must be positive"));
        // [eye]
        v.push_back(integer<int>("eye", "n_ui", [](ScenarioConfig& c) -> auto& { return c.eye.n_ui; }, 2, 1 << 24));
        v.push_back(integer<int>("eye", "bits", [](ScenarioConfig& c) -> auto& { return c.eye.bits; }, 2, 1 << 24));
        v.push_back(integer<int>("eye", "voltage_bins", [](ScenarioConfig& c) -> auto& { return c.eye.voltage_bins; }, 2, 1 << 16));
        // [ber]
        v.push_back(integer<std::uint64_t>("ber", "n_bits", [](ScenarioConfig& c) -> auto& { return c.ber.n_bits; }, 1, kBig));
        v.push_back(integer<std::size_t>("ber", "training_bits", [](ScenarioConfig& c) -> auto& { return c.ber.training_bits; }, 0, kBig));
        v.push_back(num("ber", "initial_phase_ui", [](ScenarioConfig& c) -> auto& { return c.ber.initial_phase_ui; }));
        // [lock]
        v.push_back(integer<std::size_t>("lock", "bits", [](ScenarioConfig& c) -> auto& { return c.lock.bits; }, 1, kBig));
        v.push_back(integer<std::size_t>("lock", "training_bits", [](ScenarioConfig& c) -> auto& { return c.lock.training_bits; }, 0, kBig));
        v.push_back(num("lock", "initial_phase_ui", [](ScenarioConfig& c) -> auto& { return c.lock.initial_phase_ui; }));
        return v;
    }();
    return k;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config text

ScenarioConfig parse_config(const std::string& text) {
    ScenarioConfig c;
    std::istringstream is(text);
    std::string raw, section;
    std::set<std::string> seen;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(std::string_view(raw).substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(line, "unterminated section header");
            section = trim(std::string_view(s).substr(1, s.size() - 2));
            bool known = false;
            for (const auto& k : keys()) known = known || k.section == section;
            if (!known) throw ConfigError(line, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(line, "expected key = value");
        const std::string key = trim(std::string_view(s).substr(0, eq));
        const std::string value = trim(std::string_view(s).substr(eq + 1));
        if (section.empty()) throw ConfigError(line, "key '" + key + "' outside a section");
        const Key* k = nullptr;
        for (const auto& cand : keys()) {
            if (cand.section == section && cand.name == key) k = &cand;
        }
        if (!k) throw ConfigError(line, "unknown key '" + key + "' in [" + section + "]");
        if (!seen.insert(section + "." + key).second) throw ConfigError(line, "duplicate key '" + key + "'");
        try {
            k->set(c, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(line, key + " = '" + value + "': " + e.what());
        }
    }
    // Cross-field checks.
    if (c.payload_bytes % 4 != 0) throw ConfigError(0, "payload_bytes must be a multiple of 4");
    if (c.eye.bits < c.eye.n_ui + 2) throw ConfigError(0, "eye bits must exceed n_ui by at least 2");
    try {
        c.protocol.power.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, std::string("power profile: ") + e.what());
    }
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(0, "cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config(os.str());
}

std::string dump_config(const ScenarioConfig& c) {
    std::string out, section;
    for (const auto& k : keys()) {
        if (k.section != section) {
            section = k.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += k.name + " = " + k.get(c) + "\n";
    }
    return out;
}

std::string config_hash(const ScenarioConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string provenance_line(const ScenarioConfig& c) {
    return std::string("# c2clink ") + kToolVersion + " config " + config_hash(c) + "\n";
}

void set_seed(ScenarioConfig& c, std::uint64_t seed) {
    c.protocol.seed = seed;
    c.payload_seed = seed;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1u);
    return b;
}

RecoveryConfig recovery_config(const ScenarioConfig& c, double initial_phase_ui, std::size_t training) {
    RecoveryConfig r;
    r.channel = c.protocol.channel;
    r.freq_offset = c.protocol.freq_offset;
    r.initial_phase_ui = initial_phase_ui;
    r.n = c.protocol.cdr_n;
    r.boundary_detector = c.boundary_detector;
    r.filter = c.protocol.filter;
    r.integral_k = c.protocol.integral_k;
    r.seed = c.protocol.seed;
    r.check_from_bit = training;
    r.throw_on_loss = false;
    return r;
}

std::vector<std::uint8_t> link_bits(std::size_t training, std::size_t payload, std::uint64_t seed) {
    auto bits = alternating_bits(training);
    const auto tail = random_bits(payload, seed);
    bits.insert(bits.end(), tail.begin(), tail.end());
    return bits;
}

std::string g(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

}  // namespace

CommandResult cmd_run(const ScenarioConfig& c) {
    CommandResult out;
    const auto payload = random_payload(c.payload_bytes, c.payload_seed);
    try {
        const auto r = run_protocol(c.protocol, payload);
        std::uint64_t bit_errors = 0;
        for (std::size_t i = 0; i < payload.size(); ++i) bit_errors += std::popcount(static_cast<unsigned>(payload[i] ^ r.received[i]));
        const std::string text = r.to_text() + "bit_errors: " + std::to_string(bit_errors) + "\n";
        out.summary = text;
        out.artifacts.push_back({"report.txt", provenance_line(c) + text});
        out.artifacts.push_back({"events.csv", provenance_line(c) + r.events_csv()});
    } catch (const LossOfLock& e) {
        out.exit_code = 1;
        out.summary = std::string("LossOfLock: ") + e.what() + "\n";
    } catch (const ProtocolDeadlock& e) {
        out.exit_code = 1;
        out.summary = std::string("ProtocolDeadlock: ") + e.what() + "\n";
    } catch (const DataMismatch& e) {
        out.exit_code = 1;
        out.summary = std::string("DataMismatch: ") + e.what() + "\n";
    }
    return out;
}

CommandResult cmd_eye(const ScenarioConfig& c) {
    CommandResult out;
    const auto& ch = c.protocol.channel;
    const auto bits = random_bits(static_cast<std::size_t>(c.eye.bits), c.protocol.seed);
    std::mt19937_64 rng(c.protocol.seed);
    try {
        const auto eye = eye_capture(channel_apply(drive(bits, ch), ch, rng), kUiPs, c.eye.n_ui, c.eye.voltage_bins);
        out.summary = "eye_height_v: " + g(eye.eye_height_v) + "\neye_width_ui: " + g(eye.eye_width_ui) +
                      "\ntrace_length_cm: " + g(ch.trace_length_cm) + "\n";
        out.artifacts.push_back({"eye.csv", provenance_line(c) + eye.csv()});
        out.artifacts.push_back({"eye_summary.csv", provenance_line(c) + eye.summary_csv()});
    } catch (const InsufficientSpan& e) {
        out.exit_code = 1;
        out.summary = std::string("InsufficientSpan: ") + e.what() + "\n";
    }
    return out;
}

CommandResult cmd_energy(const ScenarioConfig& c, const std::string& compare) {
    static const std::vector<double> kBws{50, 100, 200, 400, 600};
    static const std::vector<double> kBufs{64, 32, 16, 8, 4, 2, 1, 0.5};
    CommandResult out;
    const auto& p = c.protocol.power;
    const auto bws = c.energy.bandwidths_mbps.empty() ? kBws : c.energy.bandwidths_mbps;
    const auto bufs = c.energy.buffers_kb.empty() ? kBufs : c.energy.buffers_kb;
    const auto buffer = static_cast<std::size_t>(std::llround(c.energy.buffer_kb * 1024));
    out.artifacts.push_back({"energy_curves.csv", provenance_line(c) + energy_curves_csv(p, bws, bufs)});

    const double bwm = bw_max(p, buffer);
    out.summary = "continuous_pj_per_bit: " + g(continuous_energy(p)) + "\nactive_mw: " + g(p.active_mw()) +
                  "\nbw_max_mbps: " + g(bwm / 1e6) + " (" + g(c.energy.buffer_kb) + " KB)\n";

    if (!compare.empty()) {
        std::vector<std::string> names;
        if (compare == "all") {
            for (const auto& cv : reference_curves()) {
                if (cv.name != "serdes_16kb") names.push_back(cv.name);
            }
        } else {
            names.push_back(compare == "spi" ? "single_spi" : compare);
            reference_curve(names.back());  // unknown names throw here
        }
        std::string table = "curve,mode,serdes_bw_mbps,serdes_pj_per_bit,reference_bw_mbps,reference_pj_per_bit,ratio\n";
        char buf[256];
        auto row = [&](const std::string& name, const char* mode, const ComparisonResult& r) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.6g,%.6g,%.6g,%.4f\n", name.c_str(), mode, r.serdes_bw_mbps,
                          r.serdes_pj_per_bit, r.reference_bw_mbps, r.reference_pj_per_bit, r.ratio);
            table += buf;
            std::snprintf(buf, sizeof buf, "%-14s %-16s %8.2fx  (%.4g vs %.4g pJ/bit)\n", name.c_str(), mode, r.ratio,
                          r.reference_pj_per_bit, r.serdes_pj_per_bit);
            out.summary += buf;
        };
        for (const auto& name : names) {
            row(name, "best-case", compare_peripherals(p, buffer, bwm, name, Comparison::BestCase));
            for (double bw : {10e6, bwm}) {
                try {
                    row(name, bw == bwm ? "same-bw@bw_max" : "same-bw@10mbps",
                        compare_peripherals(p, buffer, bw, name, Comparison::SameBandwidth));
                } catch (const CurveOutOfRange&) {
                    // curve does not reach this bandwidth
                }
            }
        }
        out.artifacts.push_back({"comparison.csv", provenance_line(c) + table});
    }
    return out;
}

BerResult measure_ber(const ScenarioConfig& c) {
    if (c.ber.n_bits == 0) throw std::invalid_argument("n_bits must be positive");
    const auto bits = link_bits(c.ber.training_bits, c.ber.n_bits, c.payload_seed);
    const auto r = recover_stream(bits, recovery_config(c, c.ber.initial_phase_ui, c.ber.training_bits));
    BerResult b;
    b.bits = static_cast<std::uint64_t>(r.bits_checked);
    b.errors = static_cast<std::uint64_t>(r.bit_errors);
    b.loss_of_lock = r.loss_of_lock;
    if (b.bits == 0) {
        b.ber = 1;
        b.upper95 = 1;
        return b;
    }
    b.ber = static_cast<double>(b.errors) / static_cast<double>(b.bits);
    // Clopper-Pearson, one-sided.
    b.upper95 = b.errors >= b.bits ? 1.0
                                   : boost::math::ibeta_inv(static_cast<double>(b.errors + 1),
                                                            static_cast<double>(b.bits - b.errors), 0.95);
    return b;
}

CommandResult cmd_ber(const ScenarioConfig& c) {
    CommandResult out;
    const auto b = measure_ber(c);
    out.summary = "bits: " + std::to_string(b.bits) + "\nerrors: " + std::to_string(b.errors) + "\nber: " + g(b.ber) +
                  "\nber_upper95: " + g(b.upper95) + "\nloss_of_lock: " + fmt(b.loss_of_lock) + "\n";
    out.artifacts.push_back({"ber.csv", provenance_line(c) + "bits,errors,ber,ber_upper95,loss_of_lock\n" +
                                            std::to_string(b.bits) + "," + std::to_string(b.errors) + "," + g(b.ber) +
                                            "," + g(b.upper95) + "," + fmt(b.loss_of_lock) + "\n"});
    return out;
}

CommandResult cmd_lock(const ScenarioConfig& c) {
    CommandResult out;
    const auto bits = link_bits(c.lock.training_bits, c.lock.bits, c.payload_seed);
    const auto r = recover_stream(bits, recovery_config(c, c.lock.initial_phase_ui, c.lock.training_bits));
    out.summary = "lock_time_ns: " + (r.lock_time_ns ? g(*r.lock_time_ns) : std::string("none")) +
                  "\npi_steps: " + std::to_string(r.pi_steps_issued) + "\nbit_errors: " + std::to_string(r.bit_errors) +
                  "\nloss_of_lock: " + fmt(r.loss_of_lock) + "\n";
    out.artifacts.push_back({"lock.csv", provenance_line(c) + r.trace_csv()});
    if (!r.lock_time_ns || r.loss_of_lock) out.exit_code = 1;
    return out;
}

}  // namespace c2c
