#pragma once

// Scenario files and the command implementations behind the c2clink tool.
// Commands return their artifacts as strings; the tool decides where they go.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2c/node.hpp"

namespace c2c {

inline constexpr const char* kToolVersion = "0.1.0";

struct ConfigError : std::runtime_error {
    ConfigError(int line, const std::string& what);
    int line;  // 0 when not tied to a line
};

struct EyeSettings {
    int n_ui = 150;
    int bits = 400;
    int voltage_bins = 64;
};

struct BerSettings {
    std::uint64_t n_bits = 1000000;
    std::size_t training_bits = 4000;
    double initial_phase_ui = 0.5;
};

struct LockSettings {
    std::size_t bits = 20000;
    std::size_t training_bits = 4000;
    double initial_phase_ui = 0.5;
};

struct EnergySettings {
    std::vector<double> bandwidths_mbps;  // empty: the 50..600 Mbps grid
    std::vector<double> buffers_kb;       // empty: 64 KB down to 0.5 KB
    double buffer_kb = 16;                // for comparisons and BW_max
};

/// Everything a run needs. Defaults are the nominal operating point: 1.2 V,
/// 400 MHz fast clock (0.8 Gbps DDR), N = 4, 0.44 V swing, 2 cm trace,
/// 16 KB transfer.
struct ScenarioConfig {
    ProtocolConfig protocol;
    std::size_t payload_bytes = 16384;
    std::uint64_t payload_seed = 1;
    bool boundary_detector = true;
    EyeSettings eye;
    BerSettings ber;
    LockSettings lock;
    EnergySettings energy;
};

/// `key = value` lines under `[section]` headers; `#` starts a comment.
/// Unknown sections or keys, bad values and duplicates raise ConfigError
/// with the offending line.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
/// Canonical dump of every key; parse_config(dump_config(c)) round-trips.
std::string dump_config(const ScenarioConfig& c);
/// FNV-1a 64 of dump_config, as 16 hex digits.
std::string config_hash(const ScenarioConfig& c);
/// `# c2clink <version> config <hash>` plus a newline.
std::string provenance_line(const ScenarioConfig& c);

void set_seed(ScenarioConfig& c, std::uint64_t seed);

struct Artifact {
    std::string name;  // file name under --out
    std::string content;
};

struct CommandResult {
    int exit_code = 0;  // 0 ok, 1 domain failure
    std::string summary;  // printed to stdout
    std::vector<Artifact> artifacts;
};

CommandResult cmd_run(const ScenarioConfig& c);
CommandResult cmd_eye(const ScenarioConfig& c);
/// compare: empty for none, a curve name, "spi" for single_spi or "all".
CommandResult cmd_energy(const ScenarioConfig& c, const std::string& compare);
CommandResult cmd_ber(const ScenarioConfig& c);
CommandResult cmd_lock(const ScenarioConfig& c);

struct BerResult {
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    double ber = 0;
    double upper95 = 0;  // one-sided 95% upper bound
    bool loss_of_lock = false;
};
/// Raw bit errors after recovery, counted from lock or the end of training,
/// whichever comes first. Counting stops if the loop slips.
BerResult measure_ber(const ScenarioConfig& c);

}  // namespace c2c
