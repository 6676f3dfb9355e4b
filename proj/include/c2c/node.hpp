#pragma once

// Two simulated chips on one deterministic event loop: configuration
// registers, flat memory, DMA movers with clock-crossing FIFOs, GPIO wires
// and the two scripted synchronization programs.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2c/cdr.hpp"
#include "c2c/energy.hpp"
#include "c2c/phy.hpp"

namespace c2c {

// ---------------------------------------------------------------------------
// Scheduler

/// Simulation time in femtoseconds.
using SimTime = std::int64_t;
inline constexpr SimTime kEndOfSimulation = INT64_MAX;
constexpr SimTime fs_from_ps(double ps) { return static_cast<SimTime>(ps * 1000.0 + (ps >= 0 ? 0.5 : -0.5)); }
constexpr double ns_from_fs(SimTime t) { return static_cast<double>(t) * 1e-6; }

class Scheduler {
public:
    using Action = std::function<void()>;

    /// Events at equal times run in insertion order. Throws
    /// std::invalid_argument for a time before now().
    void schedule(SimTime t, Action a);
    /// Runs the earliest event and returns its time; kEndOfSimulation when
    /// nothing is queued.
    SimTime advance();
    SimTime now() const { return now_; }
    bool empty() const { return queue_.empty(); }
    std::size_t pending() const { return queue_.size(); }
    std::uint64_t dispatched() const { return dispatched_; }

private:
    struct Entry {
        SimTime t;
        std::uint64_t seq;
        Action a;
        bool operator>(const Entry& o) const { return t != o.t ? t > o.t : seq > o.seq; }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
    SimTime now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t dispatched_ = 0;
};

// ---------------------------------------------------------------------------
// Registers, memory, FIFOs, DMA, GPIO

struct UnknownRegister : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct AlignmentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ProtocolDeadlock : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GpioConflict : std::logic_error {
    using std::logic_error::logic_error;
};

struct ConfigRegisters {
    std::uint32_t tx_data_addr = 0;
    std::uint32_t rx_data_addr = 0;
    std::uint32_t tx_data_size = 0;
    std::uint32_t rx_data_size = 0;
    bool warm_en = false;
    bool comm_en = false;
    int cdr_n = 4;
};

/// Register names: tx_data_addr, rx_data_addr, tx_data_size, rx_data_size,
/// warm_en, comm_en, cdr_n.
const std::vector<std::string>& register_names();

/// One chip's register file and memory. warm_en / comm_en writes are
/// forwarded through on_enable at the time of the write.
class Node {
public:
    Node(std::string name, std::size_t memory_bytes);

    /// UnknownRegister for a name outside register_names(); AlignmentError
    /// for a size or address that is not word-aligned or leaves memory;
    /// std::invalid_argument for a bad CDR divider.
    void write_register(const std::string& name, std::uint32_t value);
    std::uint32_t read_register(const std::string& name) const;

    const ConfigRegisters& registers() const { return regs_; }
    const std::string& name() const { return name_; }
    std::vector<std::uint8_t>& memory() { return mem_; }
    const std::vector<std::uint8_t>& memory() const { return mem_; }

    std::function<void(const std::string& reg, bool value)> on_enable;

private:
    void check_span(std::uint32_t addr, std::uint32_t size) const;

    std::string name_;
    std::vector<std::uint8_t> mem_;
    ConfigRegisters regs_;
};

/// Bounded queue of 32-bit words across a clock boundary. A word becomes
/// visible to the reader `latency` after it is written; it occupies a slot
/// from the write on.
class CdcFifo {
public:
    CdcFifo(int depth = 4, SimTime latency = 0);

    bool full() const { return static_cast<int>(q_.size()) >= depth_; }
    bool empty() const { return q_.empty(); }
    std::size_t size() const { return q_.size(); }
    /// False (and nothing stored) when full.
    bool push(SimTime now, std::uint32_t w);
    bool can_pop(SimTime now) const { return !q_.empty() && q_.front().first <= now; }
    std::uint32_t pop();
    std::size_t max_occupancy() const { return max_occ_; }

private:
    int depth_;
    SimTime latency_;
    std::deque<std::pair<SimTime, std::uint32_t>> q_;
    std::size_t max_occ_ = 0;
};

struct DmaChannel {
    enum class Direction { Read, Write };  // Read: memory -> FIFO
    Direction dir = Direction::Read;
    std::uint32_t cursor = 0;
    std::uint32_t remaining = 0;  // bytes
    bool done = false;
    std::uint64_t words = 0;
    std::uint64_t stalls = 0;
};

enum class DmaProgress { Idle, Moved, Stalled, Completed };

/// One DMA clock cycle: moves at most one word between memory and the FIFO.
/// Words are little-endian. Completed is returned on the cycle that moves
/// the last word.
DmaProgress dma_step(DmaChannel& ch, std::vector<std::uint8_t>& memory, CdcFifo& fifo, SimTime now);

struct GpioPin {
    bool level = false;
    enum class Direction { In, Out } direction = Direction::In;
};

// ---------------------------------------------------------------------------
// Protocol run

enum class Scenario { TxInitiated, RxInitiated };
const char* to_string(Scenario s);

/// Per-line costs in CPU cycles.
struct ProgramCosts {
    int gpio_dir = 2;     // read-modify-write of the direction register
    int prepare = 2;      // buffer pointer setup; the data itself is already in memory
    int reg_write = 1;    // one store
    int dma_setup = 4;    // address, size and start stores plus one
    int gpio_write = 1;
    int irq_latency = 6;  // edge to first handler instruction
    int poll = 3;         // load, compare, branch
};

struct ProtocolConfig {
    Scenario scenario = Scenario::TxInitiated;
    ChannelConfig channel;
    double freq_offset = 0.0;  // TX fast clock faster than RX by this fraction
    int cdr_n = 4;
    LoopFilterKind filter = LoopFilterKind::ProportionalIntegral;
    int integral_k = 4;
    /// RX clock phase at reset, ps in [0, 2500); negative picks one from the seed.
    double rx_phase_ps = -1.0;
    std::uint64_t seed = 1;
    double cpu_clock_hz = 50e6;  // core and DMA
    ProgramCosts costs;
    std::size_t memory_bytes = 64 * 1024;
    std::uint32_t tx_addr = 0x0000;
    std::uint32_t rx_addr = 0x0000;
    int fifo_depth = 4;
    int fifo_latency_cycles = 2;  // reader-side cycles
    /// "RX clock ready" after this many filter evaluations that saw data
    /// transitions since warm-up was enabled.
    int rx_ready_evaluations = 16;
    /// RX-initiated run, TX's last wait: loop while GPIO0 == 1 && GPIO1 == 1
    /// as written; false loops on GPIO1 alone.
    bool literal_rx_init_wait = true;
    double watchdog_factor = 10.0;
    PowerProfile power;
};

struct EventRecord {
    SimTime t;
    std::string node;  // "tx" or "rx"
    std::string signal;
    std::string value;
};

struct TransferReport {
    Scenario scenario = Scenario::TxInitiated;
    std::size_t payload_bytes = 0;
    std::size_t delivered_bytes = 0;
    std::vector<std::uint8_t> received;  // RX buffer region after the run
    std::size_t byte_errors = 0;
    std::uint64_t decode_errors = 0;
    std::uint64_t data_flits = 0;
    std::uint64_t tx_underruns = 0;  // Valid dropped before the DMA finished
    std::uint64_t rx_overflows = 0;
    double setup_ns = 0;     // program start -> first warm_en
    double warmup_ns = 0;    // first warm_en -> start flit
    double data_ns = 0;      // start flit -> RX DMA done
    double teardown_ns = 0;  // RX DMA done -> both programs finished
    double programming_latency_ns = 0;
    double rx_clock_wait_ns = 0;
    double tx_warm_ns = 0;   // TX warm_en -> start flit
    std::int64_t pi_steps = 0;
    double energy_pj = 0;
    double end_ns = 0;
    std::vector<EventRecord> events;
    ModeLog modes;

    /// `key: value` lines.
    std::string to_text() const;
    /// time_ns,node,signal,value
    std::string events_csv() const;
    /// Events matching node and signal, in order.
    std::vector<EventRecord> find(const std::string& node, const std::string& signal) const;
};

/// Runs one transfer of `payload` (a multiple of 4 bytes) from the TX node
/// to the RX node under the chosen algorithm. Throws ProtocolDeadlock when
/// the watchdog fires, LossOfLock when the recovered clock slips a bit and
/// DataMismatch when the RX buffer differs from the payload.
TransferReport run_protocol(const ProtocolConfig& cfg, std::span<const std::uint8_t> payload);

/// Expected duration of a transfer, used for the watchdog.
double expected_transfer_ns(const ProtocolConfig& cfg, std::size_t payload_bytes);

/// Seeded random payload.
std::vector<std::uint8_t> random_payload(std::size_t n, std::uint64_t seed);

}  // namespace c2c
