#include "leosim/engine.hpp"

#include "leosim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace leosim {

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::packet_arrival:
        return "packet_arrival";
    case EventKind::tx_complete:
        return "tx_complete";
    case EventKind::topology_update:
        return "topology_update";
    case EventKind::train_step:
        return "train_step";
    case EventKind::sim_end:
        return "sim_end";
    }
    return "?";
}

std::string_view to_string(PacketStatus status) {
    switch (status) {
    case PacketStatus::in_flight:
        return "in_flight";
    case PacketStatus::delivered:
        return "delivered";
    case PacketStatus::dropped:
        return "dropped";
    case PacketStatus::stuck:
        return "stuck";
    }
    return "?";
}

void EventQueue::push(Event event) {
    if (event.time < now_) {
        throw SimulationFault("event " + std::string(to_string(event.kind)) + " scheduled in the past (t=" +
                              std::to_string(event.time.seconds()) + " s < now=" + std::to_string(now_.seconds()) +
                              " s)");
    }
    event.seq = next_seq_++;
    heap_.push(event);
}

Event EventQueue::pop() {
    Event e = heap_.top();
    heap_.pop();
    now_ = e.time;
    return e;
}

void EventQueue::advance_to(SimTime t) {
    if (t < now_) {
        throw SimulationFault("clock cannot move backwards");
    }
    now_ = t;
}

ConstellationTopology::ConstellationTopology(ConstellationSpec spec, std::vector<GatewaySite> gateways,
                                             TopologyParams params, LinkBudget budget, double earth_rotation_rad_s)
    : spec_(std::move(spec)), gateways_(std::move(gateways)), params_(params), budget_(std::move(budget)) {
    states0_ = build_constellation(spec_, earth_rotation_rad_s);
    for (const auto& g : gateways_) {
        gateway_positions_.push_back(gateway_position(g));
    }
}

TopologySnapshot ConstellationTopology::snapshot_at(double epoch_s) {
    const auto states = states_at(states0_, epoch_s);
    TopologySnapshot snap = build_topology(epoch_s, states, layout_of(spec_), gateway_positions_, params_);
    assign_rates(snap, budget_);
    return snap;
}

void TrafficSpec::validate() const {
    if (!(load_fraction > 0.0 && load_fraction <= 1.5)) {
        throw ConfigError("load_fraction", "must be within (0, 1.5]");
    }
    if (packet_bits <= 0) {
        throw ConfigError("packet_bits", "must be > 0");
    }
    if (active_gateways.size() < 2) {
        throw ConfigError("active_gateways", "traffic needs at least 2 active gateways");
    }
}

std::size_t flow_count(std::size_t n) {
    return n < 2 ? 0 : n * (n - 1);
}

double per_flow_rate(double load_fraction, double min_uplink_bps, int packet_bits, std::size_t n) {
    if (n < 2) {
        return 0.0;
    }
    return load_fraction * min_uplink_bps / (static_cast<double>(packet_bits) * static_cast<double>(n - 1));
}

double min_uplink_rate(const TopologySnapshot& snapshot, const std::vector<int>& gateways) {
    double best = 0.0;
    for (int g : gateways) {
        const auto sat = snapshot.gateway_satellite(g);
        if (!sat) {
            continue;
        }
        const NodeId gw = snapshot.gateway_node(g);
        const int e = snapshot.find_edge(gw, *sat);
        const double r = snapshot.edges()[static_cast<std::size_t>(e)].rate_from(gw);
        if (r > 0.0 && (best == 0.0 || r < best)) {
            best = r;
        }
    }
    return best;
}

Simulator::Simulator(std::unique_ptr<TopologyProvider> topology, RoutingPolicy& policy, EngineConfig config)
    : topology_(std::move(topology)), policy_(policy), config_(config) {
    if (!(config_.duration_s >= 0.0)) {
        throw ConfigError("duration_s", "must be >= 0");
    }
    if (!(config_.update_interval_s > 0.0)) {
        throw ConfigError("update_interval_s", "must be > 0");
    }
    if (config_.queue_capacity < 0) {
        throw ConfigError("queue_capacity", "must be >= 0");
    }
    if (config_.ttl_hops < 1) {
        throw ConfigError("ttl_hops", "must be >= 1");
    }
    install_snapshot(topology_->snapshot_at(0.0));
    queues_.resize(static_cast<std::size_t>(snapshot_.num_nodes()));
    for (NodeId n = 0; n < snapshot_.num_nodes(); ++n) {
        queues_[static_cast<std::size_t>(n)].owner = n;
        queues_[static_cast<std::size_t>(n)].capacity = config_.queue_capacity;
    }
    traffic_bits_ = config_.packet_bits;

    const SimTime end = SimTime::from_seconds(config_.duration_s);
    const SimTime interval = SimTime::from_seconds(config_.update_interval_s);
    if (!config_.frozen_topology && interval < end) {
        events_.push({interval, 0, EventKind::topology_update});
    }
    events_.push({end, 0, EventKind::sim_end});
}

void Simulator::install_snapshot(TopologySnapshot snapshot) {
    snapshot_ = std::move(snapshot);
    ++rebuilds_;
    policy_.on_topology(snapshot_);
    if (topology_observer_) {
        topology_observer_(snapshot_);
    }
}

void Simulator::start_traffic(const TrafficSpec& traffic) {
    traffic.validate();
    if (!flows_.empty()) {
        throw SimulationFault("traffic already started");
    }
    for (int g : traffic.active_gateways) {
        if (g < 0 || g >= snapshot_.num_gateways()) {
            throw ConfigError("active_gateways", "gateway index " + std::to_string(g) + " out of range");
        }
    }
    traffic_bits_ = traffic.packet_bits;
    const std::size_t n = traffic.active_gateways.size();
    const double rate =
        per_flow_rate(traffic.load_fraction, min_uplink_rate(snapshot_, traffic.active_gateways), traffic.packet_bits, n);
    for (int src : traffic.active_gateways) {
        for (int dst : traffic.active_gateways) {
            if (src == dst) {
                continue;
            }
            flows_.push_back({static_cast<int>(flows_.size()), src, dst, rate});
        }
    }
    if (!(rate > 0.0)) {
        return; // no connected uplink: nothing can be offered
    }
    const SimTime end = SimTime::from_seconds(config_.duration_s);
    for (const Flow& f : flows_) {
        flow_rngs_.emplace_back(config_.seed, "flow", static_cast<std::uint64_t>(f.index));
        const SimTime first = now() + SimTime::from_seconds(flow_rngs_.back().exponential(f.rate_per_s));
        if (first < end) {
            events_.push({first, 0, EventKind::packet_arrival, snapshot_.gateway_node(f.src_gw), -1, f.index});
        }
    }
}

void Simulator::inject(int src_gw, int dst_gw, SimTime at, std::optional<int> bits) {
    if (src_gw < 0 || src_gw >= snapshot_.num_gateways() || dst_gw < 0 || dst_gw >= snapshot_.num_gateways() ||
        src_gw == dst_gw) {
        throw ConfigError("inject", "invalid gateway pair");
    }
    if (bits && *bits <= 0) {
        throw ConfigError("inject", "packet size must be > 0");
    }
    events_.push({at, 0, EventKind::packet_arrival, snapshot_.gateway_node(src_gw), -1, -1,
                  snapshot_.gateway_node(dst_gw), bits.value_or(0)});
}

int Simulator::queue_length(NodeId node) const {
    return static_cast<int>(queues_[static_cast<std::size_t>(node)].contents.size());
}

void Simulator::run_until(SimTime t_end) {
    if (t_end < now()) {
        throw SimulationFault("run_until target lies in the past");
    }
    while (!events_.empty() && events_.top().time <= t_end) {
        const Event e = events_.pop();
        record_trace(e);
        dispatch(e);
    }
    events_.advance_to(t_end);
}

void Simulator::record_trace(const Event& e) {
    ++events_executed_;
    auto mix = [this](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            trace_hash_ = (trace_hash_ ^ ((v >> (8 * i)) & 0xff)) * 0x100000001b3ULL;
        }
    };
    mix(static_cast<std::uint64_t>(e.time.ticks()));
    mix(e.seq);
    mix(static_cast<std::uint64_t>(e.kind));
    mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(e.node)));
    mix(static_cast<std::uint64_t>(e.packet));
    if (config_.record_trace) {
        trace_.push_back({e.time, e.seq, e.kind, e.node, e.packet});
    }
}

void Simulator::dispatch(const Event& e) {
    switch (e.kind) {
    case EventKind::packet_arrival:
        if (e.packet < 0) {
            handle_creation(e);
        } else {
            handle_arrival(e);
        }
        break;
    case EventKind::tx_complete:
        handle_tx_complete(e.node);
        break;
    case EventKind::topology_update:
        handle_topology_update();
        break;
    case EventKind::train_step:
        policy_.train_step(e.aux);
        break;
    case EventKind::sim_end:
        sample_queues();
        break;
    }
}

Packet& Simulator::live(PacketId id) {
    auto it = live_.find(id);
    if (it == live_.end()) {
        throw SimulationFault("unknown packet " + std::to_string(id));
    }
    return it->second;
}

void Simulator::handle_creation(const Event& e) {
    Packet p;
    p.id = next_packet_id_++;
    p.created = now();
    p.at = e.node;
    if (e.flow >= 0) {
        const Flow& f = flows_[static_cast<std::size_t>(e.flow)];
        p.src = snapshot_.gateway_node(f.src_gw);
        p.dst = snapshot_.gateway_node(f.dst_gw);
        p.size_bits = traffic_bits_;
        const SimTime next = now() + SimTime::from_seconds(
                                         flow_rngs_[static_cast<std::size_t>(e.flow)].exponential(f.rate_per_s));
        if (next < SimTime::from_seconds(config_.duration_s)) {
            events_.push({next, 0, EventKind::packet_arrival, e.node, -1, e.flow});
        }
    } else {
        p.src = e.node;
        p.dst = e.aux;
        p.size_bits = e.bits > 0 ? e.bits : config_.packet_bits;
    }
    if (config_.record_paths) {
        p.path.push_back({p.src, now(), {}, {}, {}});
    }
    ++counts_.created;
    Packet& stored = live_.emplace(p.id, std::move(p)).first->second;
    if (queue_length(stored.src) >= config_.queue_capacity) {
        finish(stored, PacketStatus::dropped);
        return;
    }
    enqueue(stored, stored.src);
}

void Simulator::handle_arrival(const Event& e) {
    Packet& p = live(e.packet);
    const NodeId from = e.aux;
    p.at = e.node;
    ++p.hops;
    // Counted on arrival so that link totals equal the sum of packet hops.
    const auto key = static_cast<std::uint64_t>(std::min(from, e.node)) *
                         static_cast<std::uint64_t>(snapshot_.num_nodes()) +
                     static_cast<std::uint64_t>(std::max(from, e.node));
    ++link_usage_[key];
    if (config_.record_paths) {
        if (!(now() > p.path.back().arrival)) {
            throw SimulationFault("path times not strictly increasing for packet " + std::to_string(p.id));
        }
        p.path.push_back({e.node, now(), {}, {}, {}});
    }

    HopFeedback fb;
    fb.packet_id = p.id;
    fb.from = from;
    fb.to = e.node;
    fb.dst = p.dst;
    fb.queue_time = p.last_hop.queue_time;
    fb.tx_time = p.last_hop.tx_time;
    fb.prop_time = p.last_hop.prop_time;
    if (e.node == p.dst) {
        fb.outcome = HopOutcome::delivered;
    } else if (p.hops >= config_.ttl_hops) {
        fb.outcome = HopOutcome::stuck;
    } else if (queue_length(e.node) >= config_.queue_capacity) {
        fb.outcome = HopOutcome::dropped;
    } else {
        fb.outcome = HopOutcome::forwarded;
    }
    if (const auto agent = policy_.on_hop(view(), fb)) {
        events_.push({now(), 0, EventKind::train_step, e.node, -1, -1, *agent});
    }

    switch (fb.outcome) {
    case HopOutcome::delivered: {
        p.delivered_at = now();
        const SimTime e2e = now() - p.created;
        if (e2e != p.queue_total + p.tx_total + p.prop_total) {
            throw SimulationFault("latency components do not add up for packet " + std::to_string(p.id));
        }
        finish(p, PacketStatus::delivered);
        break;
    }
    case HopOutcome::stuck:
        finish(p, PacketStatus::stuck);
        break;
    case HopOutcome::dropped:
        finish(p, PacketStatus::dropped);
        break;
    case HopOutcome::forwarded:
        enqueue(p, e.node);
        break;
    }
}

void Simulator::enqueue(Packet& packet, NodeId node) {
    TxQueue& q = queues_[static_cast<std::size_t>(node)];
    packet.ready = now();
    packet.ticket = q.next_ticket++;
    q.contents.push_back(packet.id);
    if (static_cast<int>(q.contents.size()) > q.capacity) {
        ++bound_violations_;
    }
    if (!q.busy) {
        serve_head(node);
    }
}

void Simulator::serve_head(NodeId node) {
    TxQueue& q = queues_[static_cast<std::size_t>(node)];
    while (!q.busy && !q.contents.empty()) {
        const PacketId id = q.contents.front();
        q.contents.pop_front();
        Packet& p = live(id);
        if (p.ticket != q.served_tickets) {
            ++fifo_violations_;
        }
        q.served_tickets = p.ticket + 1;

        const auto next = policy_.next_hop(view(), node, PacketView{p.id, p.src, p.dst, p.hops});
        if (!next) {
            finish(p, PacketStatus::stuck);
            continue;
        }
        const int ei = snapshot_.find_edge(node, *next);
        if (ei < 0) {
            throw SimulationFault("policy " + policy_.name() + " chose node " + std::to_string(*next) +
                                  " which is not adjacent to " + std::to_string(node));
        }
        const Edge& edge = snapshot_.edges()[static_cast<std::size_t>(ei)];
        const double rate = edge.rate_from(node);
        if (!(rate > 0.0)) {
            throw SimulationFault("policy " + policy_.name() + " chose zero-rate link " + std::to_string(node) +
                                  "->" + std::to_string(*next));
        }
        const SimTime tx = SimTime::duration_from_seconds(transmission_time(p.size_bits, rate));
        const SimTime prop = SimTime::duration_from_seconds(propagation_time(edge.distance_m));
        const SimTime waited = now() - p.ready;
        p.last_hop = {node, p.ready, waited, tx, prop};
        p.queue_total += waited;
        p.tx_total += tx;
        p.prop_total += prop;
        if (config_.record_paths) {
            auto& hop = p.path.back();
            hop.queue_time = waited;
            hop.tx_time = tx;
            hop.prop_time = prop;
        }
        q.busy = true;
        q.busy_until = now() + tx;
        events_.push({now() + tx, 0, EventKind::tx_complete, node});
        events_.push({now() + tx + prop, 0, EventKind::packet_arrival, *next, p.id, -1, node});
    }
}

void Simulator::handle_tx_complete(NodeId node) {
    queues_[static_cast<std::size_t>(node)].busy = false;
    serve_head(node);
}

void Simulator::handle_topology_update() {
    install_snapshot(topology_->snapshot_at(now().seconds()));
    sample_queues();
    const SimTime next = now() + SimTime::from_seconds(config_.update_interval_s);
    if (next < SimTime::from_seconds(config_.duration_s)) {
        events_.push({next, 0, EventKind::topology_update});
    }
}

void Simulator::sample_queues() {
    if (!queue_observer_) {
        return;
    }
    for (const TxQueue& q : queues_) {
        if (!q.contents.empty()) {
            queue_observer_(now(), q.owner, static_cast<int>(q.contents.size()));
        }
    }
}

void Simulator::finish(Packet& packet, PacketStatus status) {
    packet.status = status;
    switch (status) {
    case PacketStatus::delivered:
        ++counts_.delivered;
        break;
    case PacketStatus::dropped:
        ++counts_.dropped;
        break;
    case PacketStatus::stuck:
        ++counts_.stuck;
        break;
    case PacketStatus::in_flight:
        break;
    }
    if (packet_sink_) {
        packet_sink_(packet);
    }
    live_.erase(packet.id);
}

void Simulator::flush_in_flight() {
    if (flushed_) {
        return;
    }
    flushed_ = true;
    if (!packet_sink_) {
        return;
    }
    std::vector<PacketId> ids;
    ids.reserve(live_.size());
    for (const auto& [id, p] : live_) {
        ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    for (PacketId id : ids) {
        packet_sink_(live_.at(id));
    }
}

AuditCounts Simulator::conservation_audit() const {
    AuditCounts c = counts_;
    c.in_flight = live_.size();
    if (c.created != c.delivered + c.dropped + c.stuck + c.in_flight) {
        throw SimulationFault("conservation audit failed: created=" + std::to_string(c.created) +
                              " delivered=" + std::to_string(c.delivered) + " dropped=" + std::to_string(c.dropped) +
                              " stuck=" + std::to_string(c.stuck) + " in_flight=" + std::to_string(c.in_flight));
    }
    return c;
}

std::pair<NodeId, NodeId> Simulator::decode_link(std::uint64_t key) const {
    const auto n = static_cast<std::uint64_t>(snapshot_.num_nodes());
    return {static_cast<NodeId>(key / n), static_cast<NodeId>(key % n)};
}

} // namespace leosim
