#pragma once

#include "leosim/channel.hpp"
#include "leosim/orbit.hpp"
#include "leosim/policy.hpp"
#include "leosim/rng.hpp"
#include "leosim/topology.hpp"
#include "leosim/units.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace leosim {

enum class EventKind { packet_arrival, tx_complete, topology_update, train_step, sim_end };
std::string_view to_string(EventKind kind);

// packet_arrival with packet < 0 creates a packet: for flow >= 0 from that
// traffic flow, otherwise from gateway node `node` to node `aux`.
struct Event {
    SimTime time;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::sim_end;
    NodeId node = -1;
    PacketId packet = -1;
    int flow = -1;
    int aux = -1;
    int bits = 0; // size of an injected packet (0: engine default)
};

// Min-heap on (time, seq). seq is assigned on push, so simultaneous events
// run in insertion order.
class EventQueue {
public:
    // Throws SimulationFault when the event lies before the current time.
    void push(Event event);
    Event pop();
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    const Event& top() const { return heap_.top(); }
    SimTime now() const { return now_; }
    void advance_to(SimTime t);

private:
    struct Later {
        bool operator()(const Event& x, const Event& y) const {
            return x.time != y.time ? x.time > y.time : x.seq > y.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t next_seq_ = 0;
    SimTime now_;
};

enum class PacketStatus { in_flight, delivered, dropped, stuck };
std::string_view to_string(PacketStatus status);

struct HopRecord {
    NodeId node = 0;
    SimTime arrival;
    // Components of the transmission that left this node (zero at the last node).
    SimTime queue_time;
    SimTime tx_time;
    SimTime prop_time;
};

struct Packet {
    PacketId id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    int size_bits = 0;
    SimTime created;
    std::optional<SimTime> delivered_at;
    PacketStatus status = PacketStatus::in_flight;
    int hops = 0; // links traversed
    SimTime queue_total;
    SimTime tx_total;
    SimTime prop_total;
    std::vector<HopRecord> path; // filled only when paths are recorded

    // Transient engine state.
    NodeId at = 0;
    SimTime ready;
    std::uint64_t ticket = 0;
    HopRecord last_hop;
};

struct TxQueue {
    NodeId owner = 0;
    int capacity = 0;
    std::deque<PacketId> contents;
    bool busy = false;
    SimTime busy_until;
    std::uint64_t next_ticket = 0;
    std::uint64_t served_tickets = 0;
};

class TopologyProvider {
public:
    virtual ~TopologyProvider() = default;
    virtual TopologySnapshot snapshot_at(double epoch_s) = 0;
};

// Orbit propagation + matching + link budget.
class ConstellationTopology final : public TopologyProvider {
public:
    ConstellationTopology(ConstellationSpec spec, std::vector<GatewaySite> gateways, TopologyParams params,
                          LinkBudget budget, double earth_rotation_rad_s = kEarthRotationRate);

    TopologySnapshot snapshot_at(double epoch_s) override;

    const ConstellationSpec& spec() const { return spec_; }
    const std::vector<GatewaySite>& gateways() const { return gateways_; }
    const std::vector<SatelliteState>& initial_states() const { return states0_; }
    const TopologyParams& params() const { return params_; }

private:
    ConstellationSpec spec_;
    std::vector<GatewaySite> gateways_;
    std::vector<Vec3> gateway_positions_;
    TopologyParams params_;
    LinkBudget budget_;
    std::vector<SatelliteState> states0_;
};

// Always returns the same graph (hand-built scenarios, frozen topologies).
class FixedTopology final : public TopologyProvider {
public:
    explicit FixedTopology(TopologySnapshot snapshot) : snapshot_(std::move(snapshot)) {}
    TopologySnapshot snapshot_at(double /*epoch_s*/) override { return snapshot_; }

private:
    TopologySnapshot snapshot_;
};

struct TrafficSpec {
    double load_fraction = 0.5;          // l in (0, 1.5]
    int packet_bits = 64'800;
    std::vector<int> active_gateways;    // gateway indexes

    void validate() const;
};

struct Flow {
    int index = 0;
    int src_gw = 0;
    int dst_gw = 0;
    double rate_per_s = 0.0;
};

// U_f = n_g (n_g - 1)
std::size_t flow_count(std::size_t active_gateways);
// lambda_flow = l * R_up_min / (packet_bits * (n_g - 1))
double per_flow_rate(double load_fraction, double min_uplink_bps, int packet_bits, std::size_t active_gateways);
// Minimum positive gateway->satellite rate over the given gateways (0 if none).
double min_uplink_rate(const TopologySnapshot& snapshot, const std::vector<int>& gateways);

struct EngineConfig {
    double duration_s = 60.0;
    double update_interval_s = 15.0;
    bool frozen_topology = false;
    int queue_capacity = 100;
    int ttl_hops = 250;
    int packet_bits = 64'800;
    std::uint64_t seed = 1;
    bool record_paths = false;
    bool record_trace = false;
};

struct AuditCounts {
    std::uint64_t created = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t stuck = 0;
    std::uint64_t in_flight = 0;
};

struct TraceEntry {
    SimTime time;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::sim_end;
    NodeId node = -1;
    PacketId packet = -1;
};

// Single-threaded discrete-event core. Packets are created at gateways, wait
// in per-node FIFO buffers, and are transmitted one at a time per node along
// the link chosen by the routing policy.
class Simulator final : private NetworkView {
public:
    Simulator(std::unique_ptr<TopologyProvider> topology, RoutingPolicy& policy, EngineConfig config);

    // Instantiates U_f Poisson flows; call once before running.
    void start_traffic(const TrafficSpec& traffic);
    // Schedules a single packet creation (for hand-built scenarios).
    void inject(int src_gw, int dst_gw, SimTime at, std::optional<int> bits = std::nullopt);
    void schedule(Event event) { events_.push(event); }

    void run_until(SimTime t_end);
    void run() { run_until(SimTime::from_seconds(config_.duration_s)); }
    // Reports every packet still in the network to the packet sink with
    // status in_flight (end of run). Idempotent.
    void flush_in_flight();

    // created == delivered + dropped + stuck + in_flight; throws SimulationFault otherwise.
    AuditCounts conservation_audit() const;

    SimTime now() const override { return events_.now(); }
    const TopologySnapshot& snapshot() const override { return snapshot_; }
    int queue_length(NodeId node) const override;
    int queue_capacity() const override { return config_.queue_capacity; }
    const NetworkView& view() const { return *this; }

    const EngineConfig& config() const { return config_; }
    const std::vector<Flow>& flows() const { return flows_; }
    int rebuild_count() const { return rebuilds_; }
    std::uint64_t fifo_violations() const { return fifo_violations_; }
    std::uint64_t queue_bound_violations() const { return bound_violations_; }
    std::uint64_t trace_hash() const { return trace_hash_; }
    const std::vector<TraceEntry>& trace() const { return trace_; }
    std::uint64_t events_executed() const { return events_executed_; }
    // Packets carried per undirected link (node pair, lower id first).
    const std::unordered_map<std::uint64_t, std::uint64_t>& link_usage() const { return link_usage_; }
    std::pair<NodeId, NodeId> decode_link(std::uint64_t key) const;
    const TxQueue& queue(NodeId node) const { return queues_[static_cast<std::size_t>(node)]; }

    void on_packet_finished(std::function<void(const Packet&)> sink) { packet_sink_ = std::move(sink); }
    void on_topology(std::function<void(const TopologySnapshot&)> fn) { topology_observer_ = std::move(fn); }
    void on_queue_sample(std::function<void(SimTime, NodeId, int)> fn) { queue_observer_ = std::move(fn); }

private:
    void dispatch(const Event& e);
    void handle_creation(const Event& e);
    void handle_arrival(const Event& e);
    void handle_tx_complete(NodeId node);
    void handle_topology_update();
    void enqueue(Packet& packet, NodeId node);
    void serve_head(NodeId node);
    void finish(Packet& packet, PacketStatus status);
    void sample_queues();
    void install_snapshot(TopologySnapshot snapshot);
    void record_trace(const Event& e);
    Packet& live(PacketId id);

    std::unique_ptr<TopologyProvider> topology_;
    RoutingPolicy& policy_;
    EngineConfig config_;
    EventQueue events_;
    TopologySnapshot snapshot_;
    std::vector<TxQueue> queues_;
    std::unordered_map<PacketId, Packet> live_;
    std::vector<Flow> flows_;
    std::vector<Rng> flow_rngs_;
    int traffic_bits_ = 0;
    PacketId next_packet_id_ = 0;

    AuditCounts counts_;
    int rebuilds_ = 0;
    bool flushed_ = false;
    std::uint64_t fifo_violations_ = 0;
    std::uint64_t bound_violations_ = 0;
    std::uint64_t trace_hash_ = 0xcbf29ce484222325ULL;
    std::uint64_t events_executed_ = 0;
    std::vector<TraceEntry> trace_;
    std::unordered_map<std::uint64_t, std::uint64_t> link_usage_;

    std::function<void(const Packet&)> packet_sink_;
    std::function<void(const TopologySnapshot&)> topology_observer_;
    std::function<void(SimTime, NodeId, int)> queue_observer_;
};

} // namespace leosim
