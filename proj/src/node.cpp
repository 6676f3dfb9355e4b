#include "c2c/node.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "c2c/codec.hpp"
#include "c2c/control.hpp"
#include "c2c/datapath.hpp"

namespace c2c {

// ---------------------------------------------------------------------------

void Scheduler::schedule(SimTime t, Action a) {
    if (t < now_) throw std::invalid_argument("event scheduled in the past");
    queue_.push({t, seq_++, std::move(a)});
}

SimTime Scheduler::advance() {
    if (queue_.empty()) return kEndOfSimulation;
    // priority_queue::top is const; the action is moved out through a copy of the entry.
    Entry e = queue_.top();
    queue_.pop();
    now_ = e.t;
    ++dispatched_;
    e.a();
    return e.t;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& register_names() {
    static const std::vector<std::string> names = {"tx_data_addr", "rx_data_addr", "tx_data_size", "rx_data_size",
                                                   "warm_en",      "comm_en",      "cdr_n"};
    return names;
}

Node::Node(std::string name, std::size_t memory_bytes) : name_(std::move(name)), mem_(memory_bytes, 0) {}

void Node::check_span(std::uint32_t addr, std::uint32_t size) const {
    if (addr % 4 != 0 || size % 4 != 0) throw AlignmentError(name_ + ": addresses and sizes must be word-aligned");
    if (static_cast<std::uint64_t>(addr) + size > mem_.size()) throw AlignmentError(name_ + ": region leaves memory");
}

void Node::write_register(const std::string& name, std::uint32_t value) {
    if (name == "tx_data_addr") {
        check_span(value, regs_.tx_data_size);
        regs_.tx_data_addr = value;
    } else if (name == "rx_data_addr") {
        check_span(value, regs_.rx_data_size);
        regs_.rx_data_addr = value;
    } else if (name == "tx_data_size") {
        check_span(regs_.tx_data_addr, value);
        regs_.tx_data_size = value;
    } else if (name == "rx_data_size") {
        check_span(regs_.rx_data_addr, value);
        regs_.rx_data_size = value;
    } else if (name == "warm_en" || name == "comm_en") {
        bool& r = name == "warm_en" ? regs_.warm_en : regs_.comm_en;
        const bool v = value != 0;
        const bool changed = r != v;
        r = v;
        if (changed && on_enable) on_enable(name, v);
    } else if (name == "cdr_n") {
        if (!valid_divider(static_cast<int>(value))) throw std::invalid_argument("cdr_n must be a power of two in 1..128");
        regs_.cdr_n = static_cast<int>(value);
    } else {
        throw UnknownRegister("no register named '" + name + "'");
    }
}

std::uint32_t Node::read_register(const std::string& name) const {
    if (name == "tx_data_addr") return regs_.tx_data_addr;
    if (name == "rx_data_addr") return regs_.rx_data_addr;
    if (name == "tx_data_size") return regs_.tx_data_size;
    if (name == "rx_data_size") return regs_.rx_data_size;
    if (name == "warm_en") return regs_.warm_en;
    if (name == "comm_en") return regs_.comm_en;
    if (name == "cdr_n") return static_cast<std::uint32_t>(regs_.cdr_n);
    throw UnknownRegister("no register named '" + name + "'");
}

// ---------------------------------------------------------------------------

CdcFifo::CdcFifo(int depth, SimTime latency) : depth_(depth), latency_(latency) {
    if (depth < 2) throw std::invalid_argument("FIFO depth must be at least 2");
}

bool CdcFifo::push(SimTime now, std::uint32_t w) {
    if (full()) return false;
    q_.emplace_back(now + latency_, w);
    max_occ_ = std::max(max_occ_, q_.size());
    return true;
}

std::uint32_t CdcFifo::pop() {
    const auto w = q_.front().second;
    q_.pop_front();
    return w;
}

DmaProgress dma_step(DmaChannel& ch, std::vector<std::uint8_t>& memory, CdcFifo& fifo, SimTime now) {
    if (ch.remaining == 0) return DmaProgress::Idle;
    if (ch.dir == DmaChannel::Direction::Read) {
        if (fifo.full()) {
            ++ch.stalls;
            return DmaProgress::Stalled;
        }
        std::uint32_t w = 0;
        for (int b = 0; b < 4; ++b) w |= static_cast<std::uint32_t>(memory.at(ch.cursor + b)) << (8 * b);
        fifo.push(now, w);
    } else {
        if (!fifo.can_pop(now)) {
            ++ch.stalls;
            return DmaProgress::Stalled;
        }
        const auto w = fifo.pop();
        for (int b = 0; b < 4; ++b) memory.at(ch.cursor + b) = static_cast<std::uint8_t>(w >> (8 * b));
    }
    ch.cursor += 4;
    ch.remaining -= 4;
    ++ch.words;
    if (ch.remaining == 0) {
        ch.done = true;
        return DmaProgress::Completed;
    }
    return DmaProgress::Moved;
}

const char* to_string(Scenario s) { return s == Scenario::TxInitiated ? "tx-initiated" : "rx-initiated"; }

// ---------------------------------------------------------------------------
// Report

std::string TransferReport::to_text() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    os << "scenario: " << to_string(scenario) << '\n'
       << "payload_bytes: " << payload_bytes << '\n'
       << "delivered_bytes: " << delivered_bytes << '\n'
       << "byte_errors: " << byte_errors << '\n'
       << "ber: " << (payload_bytes ? static_cast<double>(byte_errors) / (8.0 * payload_bytes) : 0.0) << '\n'
       << "decode_errors: " << decode_errors << '\n'
       << "data_flits: " << data_flits << '\n'
       << "tx_underruns: " << tx_underruns << '\n'
       << "rx_overflows: " << rx_overflows << '\n'
       << "setup_ns: " << num(setup_ns) << '\n'
       << "warmup_ns: " << num(warmup_ns) << '\n'
       << "data_ns: " << num(data_ns) << '\n'
       << "teardown_ns: " << num(teardown_ns) << '\n'
       << "programming_latency_ns: " << num(programming_latency_ns) << '\n'
       << "rx_clock_wait_ns: " << num(rx_clock_wait_ns) << '\n'
       << "tx_warm_ns: " << num(tx_warm_ns) << '\n'
       << "pi_steps: " << pi_steps << '\n'
       << "energy_pj: " << num(energy_pj) << '\n'
       << "end_ns: " << num(end_ns) << '\n'
       << "events: " << events.size() << '\n';
    return os.str();
}

std::string TransferReport::events_csv() const {
    std::ostringstream os;
    os << "time_ns,node,signal,value\n";
    char buf[48];
    for (const auto& e : events) {
        std::snprintf(buf, sizeof buf, "%.6f", ns_from_fs(e.t));
        os << buf << ',' << e.node << ',' << e.signal << ',' << e.value << '\n';
    }
    return os.str();
}

std::vector<EventRecord> TransferReport::find(const std::string& node, const std::string& signal) const {
    std::vector<EventRecord> out;
    for (const auto& e : events) {
        if (e.node == node && e.signal == signal) out.push_back(e);
    }
    return out;
}

std::vector<std::uint8_t> random_payload(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> p(n);
    for (auto& b : p) b = static_cast<std::uint8_t>(rng());
    return p;
}

double expected_transfer_ns(const ProtocolConfig& cfg, std::size_t payload_bytes) {
    const double cpu_ns = 1e9 / cfg.cpu_clock_hz;
    const double programming = 60 * cpu_ns;
    const double lock = cfg.rx_ready_evaluations * evaluation_cycles(cfg.cdr_n) * kClockPeriodPs / 1000.0;
    const double flits = static_cast<double>(payload_bytes) / 4 + 4;
    return programming + lock + flits * kPairsPerFlit * kClockPeriodPs / 1000.0;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

enum class Side { Tx, Rx };

struct Wire {
    bool level = false;
    int driver = -1;  // node index
};

class Link;

// A node program: a list of timed lines run by the scheduler.
class Program {
public:
    enum class Kind { Do, WaitIrq, PollWhile };
    struct Line {
        int number;
        Kind kind;
        int cost = 0;
        std::function<void()> act;
        std::function<bool()> cond;  // PollWhile: keep looping while true
        int wire = -1;                // WaitIrq
        std::function<void(SimTime, SimTime)> on_exit;  // PollWhile: (entry, exit)
    };

    static Line Do(int n, int cost, std::function<void()> act) {
        Line l{};
        l.number = n;
        l.kind = Kind::Do;
        l.cost = cost;
        l.act = std::move(act);
        return l;
    }
    static Line WaitIrq(int n, int cost, int wire) {
        Line l{};
        l.number = n;
        l.kind = Kind::WaitIrq;
        l.cost = cost;
        l.wire = wire;
        return l;
    }
    static Line Poll(int n, int cost, std::function<bool()> cond,
                     std::function<void(SimTime, SimTime)> on_exit = {}) {
        Line l{};
        l.number = n;
        l.kind = Kind::PollWhile;
        l.cost = cost;
        l.cond = std::move(cond);
        l.on_exit = std::move(on_exit);
        return l;
    }

    Program(Link& link, int node) : link_(link), node_(node) {}
    void add(Line l) { lines_.push_back(std::move(l)); }
    void start(SimTime t);
    void irq(int wire, SimTime t);
    bool finished() const { return finished_; }
    SimTime finish_time() const { return finish_t_; }

private:
    void run();
    void next(SimTime t) {
        ++pc_;
        start(t);
    }

    Link& link_;
    int node_;
    std::vector<Line> lines_;
    std::size_t pc_ = 0;
    bool finished_ = false;
    SimTime finish_t_ = 0;
    bool waiting_irq_ = false;
    std::optional<SimTime> pending_irq_[2];
    SimTime poll_entry_ = -1;
};

class Link {
public:
    Link(const ProtocolConfig& cfg, std::span<const std::uint8_t> payload);
    TransferReport run();

    // --- used by programs
    Scheduler sched;
    SimTime cpu_cycle;
    void log(int node, const std::string& signal, const std::string& value) {
        report_.events.push_back({sched.now(), node_name(node), signal, value});
    }
    void log_line(int node, int number) { log(node, "line", std::to_string(number)); }
    void gpio_dir(int node, int wire);
    void gpio_write(int node, int wire, bool v);
    bool gpio(int wire) const { return wires_[wire].level; }
    Node& node(int i) { return *nodes_[i]; }
    void write_reg(int i, const std::string& name, std::uint32_t v) { nodes_[i]->write_register(name, v); }
    void start_dma(int i);
    bool rx_clock_ready() const { return rx_ready_; }
    bool tx_done() const { return tx_done_; }
    bool rx_done() const { return rx_dma_.done; }
    void mark_comm_en(int i) {
        if (i == kTx) tx_comm_en_t_ = sched.now();
    }
    void rx_clock_wait(SimTime entry, SimTime exit) { rx_wait_ += exit - entry; }

    static constexpr int kTx = 0, kRx = 1;

private:
    static std::string node_name(int i) { return i == kTx ? "tx" : "rx"; }
    void build_programs();
    void on_enable(int node, const std::string& reg, bool v);
    void update_mode();

    void tx_cycle(std::int64_t j);
    void dma_cycle(int node, std::uint64_t gen);
    void rx_start_clock();
    void rx_cycle(std::int64_t k, std::uint64_t gen);
    SimTime rx_cycle_time(std::int64_t k) const {
        return fs_from_ps(static_cast<double>(k) * kClockPeriodPs + rx_base_ps_ + cdr_->phase_ps());
    }

    ProtocolConfig cfg_;
    std::vector<std::uint8_t> payload_;
    TransferReport report_;
    std::unique_ptr<Node> nodes_[2];
    Wire wires_[2];
    std::unique_ptr<Program> programs_[2];
    bool stop_ = false;

    // TX side
    double ui_tx_;
    double tx_period_ps_;
    StreamingLine line_;
    CdcFifo tx_fifo_;
    DmaChannel tx_dma_;
    TxState tx_state_ = TxState::Idle;
    Serializer ser_;
    LaneDisparity tx_rd_ = all_negative();
    bool tx_done_ = false;

    // RX side
    double rx_base_ps_;
    std::unique_ptr<CdrEngine> cdr_;
    bool rx_clock_on_ = false;
    std::uint64_t rx_gen_ = 0;
    std::int64_t rx_k_ = 0;
    int active_evals_ = 0;
    bool eval_transitions_ = false;
    bool rx_ready_ = false;
    SequenceDetector det_;
    TimingSynchronizer sync_;
    Deserializer deser_;
    RxController rxctl_;
    bool word_ready_prev_ = false;
    std::deque<std::uint32_t> decoded_;
    LaneDisparity rx_rd_ = all_negative();
    CdcFifo rx_fifo_;
    DmaChannel rx_dma_;
    std::uint64_t dma_gen_[2] = {0, 0};
    double d_cross_ps_;
    bool tracking_ = false;
    bool monitor_on_ = true;  // off once the stop flit is seen
    std::int64_t j_expected_ = 0;

    // timing marks
    std::optional<SimTime> first_warm_, tx_warm_t_, start_flit_t_, rx_done_t_;
    SimTime tx_comm_en_t_ = 0;
    SimTime rx_wait_ = 0;
    LinkMode mode_ = LinkMode::Idle;
};

void Program::start(SimTime t) {
    link_.sched.schedule(t, [this] { run(); });
}

void Program::irq(int wire, SimTime t) {
    if (waiting_irq_ && lines_[pc_].wire == wire) {
        waiting_irq_ = false;
        next(t + lines_[pc_].cost * link_.cpu_cycle);
    } else {
        pending_irq_[wire] = t;
    }
}

void Program::run() {
    const SimTime now = link_.sched.now();
    if (pc_ >= lines_.size()) {
        finished_ = true;
        finish_t_ = now;
        return;
    }
    auto& l = lines_[pc_];
    switch (l.kind) {
        case Kind::Do:
            link_.log_line(node_, l.number);
            link_.sched.schedule(now + l.cost * link_.cpu_cycle, [this, &l] {
                if (l.act) l.act();
                next(link_.sched.now());
            });
            break;
        case Kind::WaitIrq:
            link_.log_line(node_, l.number);
            if (pending_irq_[l.wire]) {
                const SimTime t = std::max(now, *pending_irq_[l.wire]);
                pending_irq_[l.wire].reset();
                next(t + l.cost * link_.cpu_cycle);
            } else {
                waiting_irq_ = true;
            }
            break;
        case Kind::PollWhile:
            if (poll_entry_ < 0) {
                poll_entry_ = now;
                link_.log_line(node_, l.number);
            }
            if (l.cond()) {
                link_.sched.schedule(now + l.cost * link_.cpu_cycle, [this] { run(); });
            } else {
                if (l.on_exit) l.on_exit(poll_entry_, now);
                poll_entry_ = -1;
                next(now + l.cost * link_.cpu_cycle);
            }
            break;
    }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq s{seed, salt};
    std::mt19937_64 g(s);
    return g();
}

Link::Link(const ProtocolConfig& cfg, std::span<const std::uint8_t> payload)
    : cpu_cycle(fs_from_ps(1e12 / cfg.cpu_clock_hz)),
      cfg_(cfg),
      payload_(payload.begin(), payload.end()),
      ui_tx_(kUiPs / (1.0 + cfg.freq_offset)),
      tx_period_ps_(kClockPeriodPs / (1.0 + cfg.freq_offset)),
      line_(cfg.channel, ui_tx_, 0.0, mix_seed(cfg.seed, 1)),
      tx_fifo_(cfg.fifo_depth, fs_from_ps(cfg.fifo_latency_cycles * tx_period_ps_)),
      rx_fifo_(cfg.fifo_depth, cfg.fifo_latency_cycles * fs_from_ps(1e12 / cfg.cpu_clock_hz)) {
    if (payload.empty() || payload.size() % 4 != 0) throw AlignmentError("payload must be a nonzero multiple of 4 bytes");
    if (cfg.freq_offset <= -1.0) throw std::invalid_argument("frequency offset out of range");
    if (!valid_divider(cfg.cdr_n)) throw std::invalid_argument("cdr_n must be a power of two in 1..128");
    for (int i = 0; i < 2; ++i) {
        nodes_[i] = std::make_unique<Node>(node_name(i), cfg.memory_bytes);
        nodes_[i]->on_enable = [this, i](const std::string& r, bool v) { on_enable(i, r, v); };
    }
    if (cfg.tx_addr + payload.size() > cfg.memory_bytes || cfg.rx_addr + payload.size() > cfg.memory_bytes) {
        throw AlignmentError("payload does not fit in node memory");
    }
    std::mt19937_64 rng(mix_seed(cfg.seed, 2));
    rx_base_ps_ = cfg.rx_phase_ps >= 0 ? cfg.rx_phase_ps
                                       : std::uniform_real_distribution<double>(0.0, kClockPeriodPs)(rng);
    cdr_ = std::make_unique<CdrEngine>(cfg.channel, cfg.cdr_n, cfg.filter, cfg.integral_k, true, mix_seed(cfg.seed, 3));
    d_cross_ps_ = crossing_delay_ps(cfg.channel, ui_tx_);
    tx_dma_.dir = DmaChannel::Direction::Read;
    rx_dma_.dir = DmaChannel::Direction::Write;
    report_.scenario = cfg.scenario;
    report_.payload_bytes = payload.size();
    report_.modes.initial = LinkMode::Idle;
    build_programs();
}

void Link::gpio_dir(int node, int wire) {
    auto& w = wires_[wire];
    if (w.driver >= 0 && w.driver != node) {
        throw GpioConflict("GPIO" + std::to_string(wire) + " already driven by " + node_name(w.driver));
    }
    w.driver = node;
    log(node, "gpio" + std::to_string(wire) + "_dir", "out");
}

void Link::gpio_write(int node, int wire, bool v) {
    auto& w = wires_[wire];
    if (w.driver != node) throw GpioConflict(node_name(node) + " writes GPIO" + std::to_string(wire) + " it does not drive");
    if (w.level == v) return;
    w.level = v;
    log(node, "gpio" + std::to_string(wire), v ? "1" : "0");
    if (v) programs_[1 - node]->irq(wire, sched.now());
}

void Link::on_enable(int node, const std::string& reg, bool v) {
    log(node, reg, v ? "1" : "0");
    if (v && reg == "warm_en") {
        if (!first_warm_) first_warm_ = sched.now();
        if (node == kTx && !tx_warm_t_) tx_warm_t_ = sched.now();
    }
    if (node == kRx) {
        const auto& r = nodes_[kRx]->registers();
        const bool cdr_en = r.warm_en || r.comm_en;
        if (cdr_en && !rx_clock_on_) rx_start_clock();
        if (!cdr_en && rx_clock_on_) {
            rx_clock_on_ = false;
            ++rx_gen_;
            log(kRx, "rx_clk", "0");
        }
        if (!r.comm_en) tracking_ = false;
    }
    update_mode();
}

void Link::update_mode() {
    LinkMode m = LinkMode::Idle;
    if (tx_state_ == TxState::StartHeader || tx_state_ == TxState::DataComm || tx_state_ == TxState::StopHeader) {
        m = LinkMode::DataComm;
    } else {
        for (const auto& n : nodes_) {
            if (n->registers().warm_en || n->registers().comm_en) m = LinkMode::WarmUp;
        }
    }
    if (m != mode_) {
        mode_ = m;
        report_.modes.events.push_back({ns_from_fs(sched.now()) * 1e-9, m});
    }
}

void Link::start_dma(int i) {
    const auto& r = nodes_[i]->registers();
    auto& ch = i == kTx ? tx_dma_ : rx_dma_;
    ch.cursor = i == kTx ? r.tx_data_addr : r.rx_data_addr;
    ch.remaining = i == kTx ? r.tx_data_size : r.rx_data_size;
    ch.done = false;
    const auto gen = ++dma_gen_[i];
    sched.schedule(sched.now() + cpu_cycle, [this, i, gen] { dma_cycle(i, gen); });
}

void Link::dma_cycle(int i, std::uint64_t gen) {
    if (gen != dma_gen_[i]) return;
    auto& ch = i == kTx ? tx_dma_ : rx_dma_;
    auto& fifo = i == kTx ? tx_fifo_ : rx_fifo_;
    const auto p = dma_step(ch, nodes_[i]->memory(), fifo, sched.now());
    if (p == DmaProgress::Completed) {
        log(i, "dma_done", "1");
        if (i == kRx) rx_done_t_ = sched.now();
        return;
    }
    if (p != DmaProgress::Idle && !stop_) sched.schedule(sched.now() + cpu_cycle, [this, i, gen] { dma_cycle(i, gen); });
}

void Link::tx_cycle(std::int64_t j) {
    if (stop_) return;
    if (ser_.at_boundary() && !ser_.has_pending()) {
        const auto& r = nodes_[kTx]->registers();
        TxInputs in;
        in.hs.valid = tx_fifo_.can_pop(sched.now());
        in.hs.warm_en = r.warm_en;
        in.hs.comm_en = r.comm_en;
        const auto d = tx_fsm_step(tx_state_, in);
        switch (d.flit_select) {
            case FlitSelect::None: break;
            case FlitSelect::Training: ser_.load(training_flit_bits()); break;
            case FlitSelect::Start:
                tx_rd_ = all_negative();
                ser_.load(start_flit_bits());
                start_flit_t_ = sched.now();
                break;
            case FlitSelect::Data: {
                const auto enc = encode_flit(FlitKind::Data, tx_fifo_.pop(), tx_rd_);
                tx_rd_ = enc.rd;
                ser_.load(enc.flit.bits());
                ++report_.data_flits;
                break;
            }
            case FlitSelect::Stop:
                ser_.load(stop_flit_bits());
                if (!tx_dma_.done) ++report_.tx_underruns;
                else tx_done_ = true;
                break;
        }
        if (d.next != tx_state_) {
            tx_state_ = d.next;
            log(kTx, "tx_state", to_string(tx_state_));
            update_mode();
        }
    }
    BitPair pair;
    if (!(ser_.at_boundary() && !ser_.has_pending())) pair = ser_.step().pair;
    line_.push(pair.even);
    line_.push(pair.odd);
    sched.schedule(fs_from_ps(static_cast<double>(j + 1) * tx_period_ps_), [this, j] { tx_cycle(j + 1); });
}

void Link::rx_start_clock() {
    rx_clock_on_ = true;
    const auto gen = ++rx_gen_;
    active_evals_ = 0;
    eval_transitions_ = false;
    rx_ready_ = false;
    log(kRx, "rx_clk", "1");
    // First cycle whose last sample is not in the past.
    const double now_ps = static_cast<double>(sched.now()) / 1000.0;
    rx_k_ = static_cast<std::int64_t>(std::ceil((now_ps - rx_base_ps_ - cdr_->phase_ps()) / kClockPeriodPs));
    const SimTime t = std::max(sched.now(), rx_cycle_time(rx_k_) + fs_from_ps(kUiPs));
    sched.schedule(t, [this, gen, k = rx_k_] { rx_cycle(k, gen); });
}

void Link::rx_cycle(std::int64_t k, std::uint64_t gen) {
    if (gen != rx_gen_ || stop_) return;
    const auto& r = nodes_[kRx]->registers();
    const double t_ps = static_cast<double>(rx_cycle_time(k)) / 1000.0;
    const auto cyc = cdr_->cycle(line_, t_ps);

    if (cyc.batch_done) eval_transitions_ |= cyc.transitions;
    if (cyc.evaluated) {
        if (eval_transitions_) ++active_evals_;
        eval_transitions_ = false;
        if (!rx_ready_ && active_evals_ >= cfg_.rx_ready_evaluations) {
            rx_ready_ = true;
            log(kRx, "rx_clock_ready", "1");
        }
    }

    // Slip monitor against the TX bit under each data sample.
    if (monitor_on_ && (r.comm_en || rx_ready_)) {
        for (int h = 0; h < 2; ++h) {
            const double x = (t_ps + h * kUiPs - d_cross_ps_) / ui_tx_;
            if (!tracking_) {
                if (!rx_ready_) break;
                tracking_ = true;
                j_expected_ = static_cast<std::int64_t>(std::floor(x)) - 1;
            }
            const double err = x - static_cast<double>(++j_expected_) - 0.5;
            if (std::abs(err) > 0.5) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "recovered clock slipped: phase error %.3f UI at %.3f ns", err,
                              t_ps / 1000.0);
                log(kRx, "loss_of_lock", "1");
                throw LossOfLock(buf);
            }
        }
    }

    const BitPair raw{cyc.data[0], cyc.data[1]};
    DetectorEvents ev;
    if (r.comm_en) {
        ev = det_.step(raw);
        if (ev.start_detected) {
            sync_.set_shift(ev.shift);
            rx_rd_ = all_negative();
            deser_.reset();
            log(kRx, "start_detected", ev.shift ? "odd" : "even");
        }
        if (ev.stop_detected) {
            deser_.reset();
            monitor_on_ = false;
            log(kRx, "stop_detected", "1");
        }
    } else {
        det_.reset();
    }
    const BitPair aligned = sync_.step(raw);
    const auto en = rxctl_.step({ev, word_ready_prev_, r.warm_en, r.comm_en});
    word_ready_prev_ = false;
    if (en.deserializer_en) {
        if (const auto bits = deser_.step(aligned)) {
            word_ready_prev_ = true;
            try {
                const auto d = decode_flit_bits(*bits, rx_rd_);
                rx_rd_ = d.rd;
                if (d.kind == FlitKind::Data && d.word) decoded_.push_back(*d.word);
            } catch (const CodecError&) {
                ++report_.decode_errors;
                decoded_.push_back(0);
            }
        }
    }
    if (en.valid_out && !decoded_.empty()) {
        if (!rx_fifo_.push(sched.now(), decoded_.front())) ++report_.rx_overflows;
        decoded_.pop_front();
    }

    rx_k_ = k + 1;
    const SimTime next = std::max(sched.now(), rx_cycle_time(rx_k_) + fs_from_ps(kUiPs));
    sched.schedule(next, [this, gen, k = rx_k_] { rx_cycle(k, gen); });
}

void Link::build_programs() {
    const auto& c = cfg_.costs;
    const auto size = static_cast<std::uint32_t>(payload_.size());
    for (int i = 0; i < 2; ++i) programs_[i] = std::make_unique<Program>(*this, i);
    auto& tx = *programs_[kTx];
    auto& rx = *programs_[kRx];

    auto tx_dma = [this, size] {
        write_reg(kTx, "tx_data_addr", cfg_.tx_addr);
        write_reg(kTx, "tx_data_size", size);
        start_dma(kTx);
    };
    auto rx_dma = [this, size] {
        write_reg(kRx, "rx_data_addr", cfg_.rx_addr);
        write_reg(kRx, "rx_data_size", size);
        write_reg(kRx, "cdr_n", static_cast<std::uint32_t>(cfg_.cdr_n));
        start_dma(kRx);
    };
    auto prepare_tx = [this] {
        std::copy(payload_.begin(), payload_.end(), nodes_[kTx]->memory().begin() + cfg_.tx_addr);
    };
    auto prepare_rx = [this] {
        auto& m = nodes_[kRx]->memory();
        std::fill(m.begin() + cfg_.rx_addr, m.begin() + cfg_.rx_addr + payload_.size(), 0);
    };
    auto clock_exit = [this](SimTime a, SimTime b) { rx_clock_wait(a, b); };
    auto warm = [this](int n) { return [this, n] { write_reg(n, "warm_en", 1); }; };
    auto comm = [this](int n) {
        return [this, n] {
            write_reg(n, "comm_en", 1);
            mark_comm_en(n);
        };
    };
    // Teardown, after the last line of each algorithm: wait for the transfer
    // to finish, then drop the enables and the node's GPIO.
    auto teardown = [&](Program& p, int n, int first, int wire) {
        p.add(Program::Poll(first, c.poll, [this, n] { return n == kTx ? !tx_done() : !rx_done(); }));
        p.add(Program::Do(first + 1, c.reg_write, [this, n] { write_reg(n, "comm_en", 0); }));
        p.add(Program::Do(first + 2, c.reg_write, [this, n] { write_reg(n, "warm_en", 0); }));
        p.add(Program::Do(first + 3, c.gpio_write, [this, n, wire] { gpio_write(n, wire, false); }));
    };

    if (cfg_.scenario == Scenario::TxInitiated) {
        tx.add(Program::Do(2, c.gpio_dir, [this] { gpio_dir(kTx, 0); }));
        tx.add(Program::Do(3, c.prepare, prepare_tx));
        tx.add(Program::Do(4, c.dma_setup, tx_dma));
        tx.add(Program::Do(5, c.reg_write, warm(kTx)));
        tx.add(Program::Do(6, c.gpio_write, [this] { gpio_write(kTx, 0, true); }));
        tx.add(Program::Poll(7, c.poll, [this] { return gpio(1) != 1; }));
        tx.add(Program::Do(10, c.reg_write, comm(kTx)));
        teardown(tx, kTx, 101, 0);

        rx.add(Program::Do(12, c.gpio_dir, [this] { gpio_dir(kRx, 1); }));
        rx.add(Program::WaitIrq(13, c.irq_latency, 0));
        rx.add(Program::Do(14, c.prepare, prepare_rx));
        rx.add(Program::Do(15, c.dma_setup, rx_dma));
        rx.add(Program::Do(16, c.reg_write, warm(kRx)));
        rx.add(Program::Poll(17, c.poll, [this] { return !rx_clock_ready(); }, clock_exit));
        rx.add(Program::Do(20, c.reg_write, comm(kRx)));
        rx.add(Program::Do(21, c.gpio_write, [this] { gpio_write(kRx, 1, true); }));
        teardown(rx, kRx, 201, 1);
    } else {
        rx.add(Program::Do(2, c.gpio_dir, [this] { gpio_dir(kRx, 1); }));
        rx.add(Program::Do(3, c.prepare, prepare_rx));
        rx.add(Program::Do(4, c.dma_setup, rx_dma));
        rx.add(Program::Do(5, c.reg_write, warm(kRx)));
        rx.add(Program::Do(6, c.gpio_write, [this] { gpio_write(kRx, 1, true); }));
        rx.add(Program::Poll(7, c.poll, [this] { return gpio(0) != 1; }));
        rx.add(Program::Poll(10, c.poll, [this] { return !rx_clock_ready(); }, clock_exit));
        rx.add(Program::Do(13, c.reg_write, comm(kRx)));
        // Written as "GPIO0 <= 0"; GPIO0 belongs to the TX, so the RX
        // signals readiness by dropping its own GPIO1.
        rx.add(Program::Do(14, c.gpio_write, [this] { gpio_write(kRx, 1, false); }));
        teardown(rx, kRx, 201, 1);

        // The TX's data still has to be in memory; it is placed before the run.
        tx.add(Program::Do(16, c.gpio_dir, [this] { gpio_dir(kTx, 0); }));
        tx.add(Program::WaitIrq(17, c.irq_latency, 1));
        tx.add(Program::Do(18, c.dma_setup, tx_dma));
        tx.add(Program::Do(19, c.reg_write, warm(kTx)));
        tx.add(Program::Do(20, c.gpio_write, [this] { gpio_write(kTx, 0, true); }));
        if (cfg_.literal_rx_init_wait) {
            tx.add(Program::Poll(21, c.poll, [this] { return gpio(0) == 1 && gpio(1) == 1; }));
        } else {
            tx.add(Program::Poll(21, c.poll, [this] { return gpio(1) == 1; }));
        }
        tx.add(Program::Do(24, c.reg_write, comm(kTx)));
        teardown(tx, kTx, 101, 0);
        std::copy(payload_.begin(), payload_.end(), nodes_[kTx]->memory().begin() + cfg_.tx_addr);
    }
}

TransferReport Link::run() {
    programs_[kTx]->start(0);
    programs_[kRx]->start(0);
    sched.schedule(0, [this] { tx_cycle(0); });

    const SimTime watchdog =
        fs_from_ps(cfg_.watchdog_factor * expected_transfer_ns(cfg_, payload_.size()) * 1000.0);
    while (!(programs_[kTx]->finished() && programs_[kRx]->finished())) {
        const SimTime t = sched.advance();
        if (t == kEndOfSimulation) throw ProtocolDeadlock("event queue drained before both programs finished");
        if (t > watchdog) {
            char buf[192];
            std::snprintf(buf, sizeof buf, "watchdog fired at %.3f ns (tx %s, rx %s, %llu of %zu bytes received, %llu decode errors)",
                          ns_from_fs(t), programs_[kTx]->finished() ? "done" : "waiting",
                          programs_[kRx]->finished() ? "done" : "waiting",
                          static_cast<unsigned long long>(rx_dma_.words * 4), payload_.size(),
                          static_cast<unsigned long long>(report_.decode_errors));
            throw ProtocolDeadlock(buf);
        }
    }
    stop_ = true;
    const SimTime end = sched.now();

    auto& rep = report_;
    rep.end_ns = ns_from_fs(end);
    const auto& mem = nodes_[kRx]->memory();
    rep.delivered_bytes = rx_dma_.words * 4;
    rep.received.assign(mem.begin() + cfg_.rx_addr, mem.begin() + cfg_.rx_addr + payload_.size());
    for (std::size_t i = 0; i < payload_.size(); ++i) {
        if (mem[cfg_.rx_addr + i] != payload_[i]) ++rep.byte_errors;
    }
    const SimTime warm0 = first_warm_.value_or(0);
    const SimTime start = start_flit_t_.value_or(warm0);
    const SimTime done = rx_done_t_.value_or(end);
    rep.setup_ns = ns_from_fs(warm0);
    rep.warmup_ns = ns_from_fs(start - warm0);
    rep.data_ns = ns_from_fs(done - start);
    rep.teardown_ns = ns_from_fs(end - done);
    rep.rx_clock_wait_ns = ns_from_fs(rx_wait_);
    rep.programming_latency_ns = ns_from_fs(tx_comm_en_t_ - rx_wait_);
    rep.tx_warm_ns = ns_from_fs(start - tx_warm_t_.value_or(start));
    rep.pi_steps = cdr_->steps_issued();
    rep.modes.end_s = ns_from_fs(end) * 1e-9;
    rep.energy_pj = energy_trace(rep.modes, cfg_.power) * 1e12;

    if (rep.byte_errors != 0 || rep.delivered_bytes != payload_.size()) {
        throw DataMismatch(std::to_string(rep.byte_errors) + " of " + std::to_string(payload_.size()) +
                           " bytes differ, " + std::to_string(rep.delivered_bytes) + " delivered, " +
                           std::to_string(rep.decode_errors) + " decode errors");
    }
    return rep;
}

}  // namespace

TransferReport run_protocol(const ProtocolConfig& cfg, std::span<const std::uint8_t> payload) {
    Link link(cfg, payload);
    return link.run();
}

}  // namespace c2c
