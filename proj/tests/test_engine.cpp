#include "leosim/channel.hpp"
#include "leosim/engine.hpp"
#include "leosim/errors.hpp"
#include "leosim/routing_classic.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>

using namespace leosim;

namespace {

Edge gsl(NodeId sat, NodeId gw, double dist_m, double down_bps, double up_bps) {
    return {sat, gw, LinkKind::gsl, dist_m, down_bps, up_bps};
}

Edge isl(NodeId a, NodeId b, double dist_m, double bps) {
    return {a, b, LinkKind::isl_intra, dist_m, bps, bps};
}

// G0(1) - sat 0 - G1(2)
TopologySnapshot chain(double up_bps, double down_bps, double dist_m = 1000e3) {
    return TopologySnapshot(0.0, 1, 2, {gsl(0, 1, dist_m, down_bps, up_bps), gsl(0, 2, dist_m, down_bps, up_bps)});
}

// One satellite serving n gateways.
TopologySnapshot hub(int n, double bps) {
    std::vector<Edge> edges;
    for (int g = 0; g < n; ++g) {
        edges.push_back(gsl(0, 1 + g, 800e3 + 10e3 * g, bps, bps));
    }
    return TopologySnapshot(0.0, 1, n, edges);
}

EngineConfig frozen(double duration_s) {
    EngineConfig c;
    c.duration_s = duration_s;
    c.frozen_topology = true;
    c.record_paths = true;
    return c;
}

struct Collected {
    std::vector<Packet> packets;

    void attach(Simulator& sim) {
        sim.on_packet_finished([this](const Packet& p) { packets.push_back(p); });
    }
    const Packet& by_id(PacketId id) const {
        auto it = std::find_if(packets.begin(), packets.end(), [&](const Packet& p) { return p.id == id; });
        REQUIRE(it != packets.end());
        return *it;
    }
    int count(PacketStatus s) const {
        return static_cast<int>(std::count_if(packets.begin(), packets.end(), [&](const Packet& p) { return p.status == s; }));
    }
};

// Serves a scripted list of snapshots: entry i covers epochs >= times[i].
class Scripted final : public TopologyProvider {
public:
    Scripted(std::vector<double> times, std::vector<TopologySnapshot> snaps)
        : times_(std::move(times)), snaps_(std::move(snaps)) {}
    TopologySnapshot snapshot_at(double epoch_s) override {
        std::size_t i = 0;
        while (i + 1 < times_.size() && epoch_s >= times_[i + 1]) {
            ++i;
        }
        return snaps_[i];
    }

private:
    std::vector<double> times_;
    std::vector<TopologySnapshot> snaps_;
};

class WrongNeighbour final : public RoutingPolicy {
public:
    std::string name() const override { return "wrong"; }
    std::optional<NodeId> next_hop(const NetworkView&, NodeId node, const PacketView& p) override {
        return node == p.src ? std::optional<NodeId>(0) : std::optional<NodeId>(p.src);
    }
};

} // namespace

TEST_CASE("event queue order and past scheduling") {
    EventQueue q;
    q.push({SimTime::from_seconds(2.0), 0, EventKind::sim_end, 7});
    q.push({SimTime::from_seconds(1.0), 0, EventKind::tx_complete, 1});
    q.push({SimTime::from_seconds(1.0), 0, EventKind::tx_complete, 2});
    q.push({SimTime::from_seconds(1.0), 0, EventKind::tx_complete, 3});
    CHECK(q.pop().node == 1);
    CHECK(q.pop().node == 2);
    CHECK(q.pop().node == 3);
    CHECK(q.now() == SimTime::from_seconds(1.0));
    CHECK_THROWS_AS(q.push({SimTime::from_seconds(0.5), 0, EventKind::tx_complete, 1}), SimulationFault);
    CHECK(q.pop().node == 7);
    CHECK(q.empty());
}

TEST_CASE("empty schedule runs to the end with no packets") {
    ShortestPathPolicy policy(WeightScheme::hop);
    EngineConfig c = frozen(0.0);
    c.record_trace = true;
    Simulator sim(std::make_unique<FixedTopology>(chain(1e6, 1e6)), policy, c);
    sim.run();
    // Only the end-of-run marker executes.
    REQUIRE(sim.trace().size() == 1);
    CHECK(sim.trace()[0].kind == EventKind::sim_end);
    const AuditCounts a = sim.conservation_audit();
    CHECK(a.created == 0);
    CHECK(a.delivered == 0);
    CHECK(a.in_flight == 0);
    CHECK_THROWS_AS(sim.run_until(SimTime::from_seconds(-1.0)), SimulationFault);
}

TEST_CASE("single packet latency is transmission plus propagation") {
    ShortestPathPolicy policy(WeightScheme::hop);
    Simulator sim(std::make_unique<FixedTopology>(chain(64'800.0, 129'600.0)), policy, frozen(10.0));
    Collected out;
    out.attach(sim);
    sim.inject(0, 1, SimTime::from_seconds(0.25));
    sim.run();
    REQUIRE(out.packets.size() == 1);
    const Packet& p = out.packets[0];
    CHECK(p.status == PacketStatus::delivered);
    CHECK(p.hops == 2);
    CHECK(p.queue_total.ticks() == 0);
    const SimTime tx = SimTime::duration_from_seconds(1.0) + SimTime::duration_from_seconds(0.5);
    const SimTime prop = SimTime::from_ticks(2 * SimTime::duration_from_seconds(propagation_time(1000e3)).ticks());
    CHECK(p.tx_total == tx);
    CHECK(p.prop_total == prop);
    CHECK(*p.delivered_at - p.created == tx + prop);
    REQUIRE(p.path.size() == 3);
    CHECK(p.path.back().node == p.dst);
}

TEST_CASE("back-to-back packets: second waits one transmission time") {
    ShortestPathPolicy policy(WeightScheme::hop);
    Simulator sim(std::make_unique<FixedTopology>(chain(64'800.0, 1e9)), policy, frozen(10.0));
    Collected out;
    out.attach(sim);
    sim.inject(0, 1, SimTime::from_seconds(0.0));
    sim.inject(0, 1, SimTime::from_seconds(0.0));
    sim.run();
    REQUIRE(out.count(PacketStatus::delivered) == 2);
    const Packet& first = out.by_id(0);
    const Packet& second = out.by_id(1);
    CHECK(first.path[0].queue_time.ticks() == 0);
    CHECK(second.path[0].queue_time == first.path[0].tx_time);
    CHECK(second.queue_total == first.tx_total - first.path[1].tx_time);
    CHECK(sim.fifo_violations() == 0);
}

TEST_CASE("full queues drop") {
    ShortestPathPolicy policy(WeightScheme::hop);
    SUBCASE("capacity zero drops everything") {
        EngineConfig c = frozen(10.0);
        c.queue_capacity = 0;
        Simulator sim(std::make_unique<FixedTopology>(chain(1e6, 1e6)), policy, c);
        Collected out;
        out.attach(sim);
        for (int i = 0; i < 5; ++i) {
            sim.inject(i % 2, 1 - i % 2, SimTime::from_seconds(0.1 * i));
        }
        sim.run();
        CHECK(out.count(PacketStatus::dropped) == 5);
        CHECK(sim.conservation_audit().dropped == 5);
    }
    SUBCASE("capacity one: the third simultaneous packet is dropped") {
        EngineConfig c = frozen(10.0);
        c.queue_capacity = 1;
        Simulator sim(std::make_unique<FixedTopology>(chain(64'800.0, 1e9)), policy, c);
        Collected out;
        out.attach(sim);
        for (int i = 0; i < 3; ++i) {
            sim.inject(0, 1, SimTime::from_seconds(0.0));
        }
        sim.run();
        CHECK(out.count(PacketStatus::delivered) == 2);
        CHECK(out.by_id(2).status == PacketStatus::dropped);
        CHECK(sim.queue_bound_violations() == 0);
    }
}

TEST_CASE("flow count and rate") {
    CHECK(flow_count(8) == 56);
    CHECK(flow_count(18) == 306);
    CHECK(flow_count(1) == 0);
    CHECK(per_flow_rate(0.5, 64'800.0 * 14, 64'800, 8) == doctest::Approx(1.0));

    for (int n : {8, 18}) {
        ShortestPathPolicy policy(WeightScheme::hop);
        Simulator sim(std::make_unique<FixedTopology>(hub(n, 1e8)), policy, frozen(1.0));
        TrafficSpec t;
        t.active_gateways.resize(static_cast<std::size_t>(n));
        std::iota(t.active_gateways.begin(), t.active_gateways.end(), 0);
        sim.start_traffic(t);
        CHECK(sim.flows().size() == flow_count(static_cast<std::size_t>(n)));
        for (const Flow& f : sim.flows()) {
            CHECK(f.src_gw != f.dst_gw);
            CHECK(f.rate_per_s == doctest::Approx(0.5 * 1e8 / (64'800.0 * (n - 1))));
        }
    }

    ShortestPathPolicy policy(WeightScheme::hop);
    Simulator sim(std::make_unique<FixedTopology>(hub(3, 1e8)), policy, frozen(1.0));
    TrafficSpec bad;
    bad.active_gateways = {0};
    CHECK_THROWS_AS(sim.start_traffic(bad), ConfigError);
    bad.active_gateways = {0, 1};
    bad.load_fraction = 0.0;
    CHECK_THROWS_AS(sim.start_traffic(bad), ConfigError);
}

TEST_CASE("Poisson inter-arrival mean matches 1/lambda") {
    // Uplink R = 2 * 64800 bit/s with l = 0.5 and two gateways: lambda = 1/s
    // per flow. 2 flows x 5e5 s gives about 1e6 arrivals.
    ShortestPathPolicy policy(WeightScheme::hop);
    EngineConfig c = frozen(5e5);
    c.record_paths = false;
    Simulator sim(std::make_unique<FixedTopology>(chain(129'600.0, 1e12)), policy, c);
    std::map<NodeId, std::vector<double>> created;
    sim.on_packet_finished([&](const Packet& p) { created[p.src].push_back(p.created.seconds()); });
    TrafficSpec t;
    t.active_gateways = {0, 1};
    sim.start_traffic(t);
    const double lambda = sim.flows()[0].rate_per_s;
    CHECK(lambda == doctest::Approx(1.0));
    sim.run();
    sim.flush_in_flight();
    std::size_t total = 0;
    for (auto& [src, times] : created) {
        std::sort(times.begin(), times.end());
        const double mean = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
        CHECK(std::abs(mean - 1.0 / lambda) < 0.01 / lambda);
        total += times.size();
    }
    CHECK(total > 990'000);
    CHECK(sim.conservation_audit().created == total);
}

TEST_CASE("topology rebuild schedule") {
    ShortestPathPolicy policy(WeightScheme::hop);
    EngineConfig c;
    c.duration_s = 96 * 60.0;
    c.update_interval_s = 15.0;
    Simulator sim(std::make_unique<FixedTopology>(chain(1e6, 1e6)), policy, c);
    std::vector<double> at;
    sim.on_topology([&](const TopologySnapshot&) { at.push_back(sim.now().seconds()); });
    sim.run();
    CHECK(sim.rebuild_count() == 384);
    REQUIRE(at.size() == 383);
    CHECK(at.front() == 15.0);
    CHECK(at.back() == 5745.0);

    ShortestPathPolicy p2(WeightScheme::hop);
    c.frozen_topology = true;
    Simulator still(std::make_unique<FixedTopology>(chain(1e6, 1e6)), p2, c);
    still.run();
    CHECK(still.rebuild_count() == 1);
}

TEST_CASE("queued packets survive a topology update in order") {
    ShortestPathPolicy policy(WeightScheme::hop);
    EngineConfig c;
    c.duration_s = 10.0;
    c.update_interval_s = 2.0;
    c.record_paths = true;
    Simulator sim(std::make_unique<FixedTopology>(chain(64'800.0, 1e9)), policy, c);
    Collected out;
    out.attach(sim);
    std::vector<std::pair<double, int>> g0_samples;
    sim.on_queue_sample([&](SimTime t, NodeId n, int occ) {
        if (n == 1) {
            g0_samples.emplace_back(t.seconds(), occ);
        }
    });
    for (int i = 0; i < 5; ++i) {
        sim.inject(0, 1, SimTime::from_seconds(0.0));
    }
    sim.run();
    // At t = 2 s packets 0 and 1 have left; 2, 3, 4 still wait.
    REQUIRE_FALSE(g0_samples.empty());
    CHECK(g0_samples[0] == std::pair<double, int>{2.0, 3});
    REQUIRE(out.count(PacketStatus::delivered) == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(out.packets[static_cast<std::size_t>(i)].id == i);
        CHECK(out.by_id(i).path[0].queue_time == SimTime::from_seconds(1.0 * i));
    }
    CHECK(sim.fifo_violations() == 0);
}

TEST_CASE("handover while packets are queued") {
    // Before t = 1.5 s satellite 0 serves both gateways; afterwards G1 moves
    // to satellite 1 and the queued traffic has to go through the ISL.
    const NodeId g0 = 2, g1 = 3;
    TopologySnapshot before(0.0, 2, 2, {gsl(0, g0, 900e3, 1e9, 1e9), gsl(0, g1, 900e3, 64'800.0, 1e9)});
    TopologySnapshot after(1.5, 2, 2,
                           {gsl(0, g0, 900e3, 1e9, 1e9), isl(0, 1, 2000e3, 1e9), gsl(1, g1, 900e3, 1e9, 1e9)});
    TopologySnapshot isolated(1.5, 2, 2, {gsl(0, g0, 900e3, 1e9, 1e9), gsl(1, g1, 900e3, 1e9, 1e9)});

    EngineConfig c;
    c.duration_s = 10.0;
    c.update_interval_s = 1.5;
    c.record_paths = true;

    SUBCASE("rerouted over the new snapshot") {
        ShortestPathPolicy policy(WeightScheme::hop);
        Simulator sim(std::make_unique<Scripted>(std::vector<double>{0.0, 1.5}, std::vector{before, after}), policy, c);
        Collected out;
        out.attach(sim);
        for (int i = 0; i < 3; ++i) {
            sim.inject(0, 1, SimTime::from_seconds(0.0));
        }
        sim.run();
        REQUIRE(out.count(PacketStatus::delivered) == 3);
        // Packet 1 was on the old downlink when the update hit; it completes.
        CHECK(out.by_id(0).hops == 2);
        CHECK(out.by_id(1).hops == 2);
        const Packet& moved = out.by_id(2);
        CHECK(moved.hops == 3);
        CHECK(moved.path[2].node == 1);
    }
    SUBCASE("no route left: stuck") {
        ShortestPathPolicy policy(WeightScheme::hop);
        Simulator sim(std::make_unique<Scripted>(std::vector<double>{0.0, 1.5}, std::vector{before, isolated}),
                      policy, c);
        Collected out;
        out.attach(sim);
        for (int i = 0; i < 3; ++i) {
            sim.inject(0, 1, SimTime::from_seconds(0.0));
        }
        sim.run();
        CHECK(out.count(PacketStatus::delivered) == 2);
        CHECK(out.by_id(2).status == PacketStatus::stuck);
        CHECK(sim.conservation_audit().stuck == 1);
    }
}

TEST_CASE("non-adjacent next hop is a hard fault") {
    WrongNeighbour policy;
    TopologySnapshot g(0.0, 2, 2, {gsl(0, 2, 900e3, 1e9, 1e9), gsl(1, 3, 900e3, 1e9, 1e9)});
    Simulator sim(std::make_unique<FixedTopology>(g), policy, frozen(1.0));
    sim.inject(1, 0, SimTime::from_seconds(0.0));
    CHECK_THROWS_AS(sim.run(), SimulationFault);
}

TEST_CASE("TTL marks packets stuck") {
    // Ping-pong between two satellites never reaches the destination.
    class PingPong final : public RoutingPolicy {
    public:
        std::string name() const override { return "pingpong"; }
        std::optional<NodeId> next_hop(const NetworkView&, NodeId node, const PacketView&) override {
            return node == 2 ? 0 : 1 - node;
        }
    } policy;
    TopologySnapshot g(0.0, 2, 2, {gsl(0, 2, 900e3, 1e9, 1e9), isl(0, 1, 1000e3, 1e9), gsl(1, 3, 900e3, 1e9, 1e9)});
    EngineConfig c = frozen(10.0);
    c.ttl_hops = 7;
    Simulator sim(std::make_unique<FixedTopology>(g), policy, c);
    Collected out;
    out.attach(sim);
    sim.inject(0, 1, SimTime::from_seconds(0.0));
    sim.run();
    REQUIRE(out.packets.size() == 1);
    CHECK(out.packets[0].status == PacketStatus::stuck);
    CHECK(out.packets[0].hops == 7);
}

TEST_CASE("conservation audit counts packets still in flight") {
    ShortestPathPolicy policy(WeightScheme::hop);
    Simulator sim(std::make_unique<FixedTopology>(chain(64'800.0, 64'800.0)), policy, frozen(100.0));
    Collected out;
    out.attach(sim);
    for (int i = 0; i < 4; ++i) {
        sim.inject(0, 1, SimTime::from_seconds(0.0));
    }
    sim.run_until(SimTime::from_seconds(2.5));
    AuditCounts a = sim.conservation_audit();
    CHECK(a.created == 4);
    CHECK(a.in_flight > 0);
    CHECK(a.created == a.delivered + a.dropped + a.stuck + a.in_flight);
    sim.flush_in_flight();
    sim.flush_in_flight();
    CHECK(out.packets.size() == 4);
    CHECK(out.count(PacketStatus::in_flight) == static_cast<int>(a.in_flight));
}

namespace {

struct LoadedRun {
    std::uint64_t hash = 0;
    std::vector<TraceEntry> trace;
    std::vector<Packet> packets;
    std::vector<int> occupancy;
    AuditCounts audit;
    std::uint64_t fifo = 0;
    std::uint64_t bound = 0;
};

// Two satellites, four gateways, a bottleneck ISL.
LoadedRun loaded_run(std::uint64_t seed, double load, int capacity, double duration_s) {
    TopologySnapshot g(0.0, 2, 4,
                       {gsl(0, 2, 900e3, 2e6, 1e6), gsl(0, 3, 1100e3, 2e6, 1e6), isl(0, 1, 3000e3, 1.5e6),
                        gsl(1, 4, 800e3, 2e6, 1e6), gsl(1, 5, 1300e3, 2e6, 1e6)});
    ShortestPathPolicy policy(WeightScheme::hop);
    EngineConfig c;
    c.duration_s = duration_s;
    c.update_interval_s = 5.0;
    c.queue_capacity = capacity;
    c.seed = seed;
    c.record_paths = true;
    c.record_trace = true;
    c.packet_bits = 10'000;
    Simulator sim(std::make_unique<FixedTopology>(g), policy, c);
    LoadedRun r;
    sim.on_packet_finished([&](const Packet& p) { r.packets.push_back(p); });
    sim.on_queue_sample([&](SimTime, NodeId, int occ) { r.occupancy.push_back(occ); });
    TrafficSpec t;
    t.load_fraction = load;
    t.packet_bits = 10'000;
    t.active_gateways = {0, 1, 2, 3};
    sim.start_traffic(t);
    sim.run();
    sim.flush_in_flight();
    r.hash = sim.trace_hash();
    r.trace = sim.trace();
    r.audit = sim.conservation_audit();
    r.fifo = sim.fifo_violations();
    r.bound = sim.queue_bound_violations();
    return r;
}

} // namespace

TEST_CASE("identical seed gives an identical trace") {
    const LoadedRun a = loaded_run(11, 0.8, 100, 30.0);
    const LoadedRun b = loaded_run(11, 0.8, 100, 30.0);
    const LoadedRun c = loaded_run(12, 0.8, 100, 30.0);
    CHECK(a.hash == b.hash);
    REQUIRE(a.trace.size() == b.trace.size());
    bool same = true;
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        const auto& x = a.trace[i];
        const auto& y = b.trace[i];
        same = same && x.time == y.time && x.seq == y.seq && x.kind == y.kind && x.node == y.node &&
               x.packet == y.packet;
    }
    CHECK(same);
    CHECK(a.hash != c.hash);
}

TEST_CASE("invariants under overload") {
    const LoadedRun r = loaded_run(5, 1.5, 8, 60.0);
    CHECK(r.audit.dropped > 0);
    CHECK(r.audit.created == r.audit.delivered + r.audit.dropped + r.audit.stuck + r.audit.in_flight);
    CHECK(r.fifo == 0);
    CHECK(r.bound == 0);
    CHECK(std::all_of(r.occupancy.begin(), r.occupancy.end(), [](int o) { return o <= 8; }));

    // Clock monotonicity and (time, seq) order.
    bool ordered = true;
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        const auto& p = r.trace[i - 1];
        const auto& q = r.trace[i];
        ordered = ordered && (p.time < q.time || (p.time == q.time && p.seq < q.seq));
    }
    CHECK(ordered);

    int checked = 0;
    for (const Packet& p : r.packets) {
        if (p.status != PacketStatus::delivered) {
            continue;
        }
        SimTime sum;
        bool increasing = true;
        for (std::size_t i = 0; i < p.path.size(); ++i) {
            sum += p.path[i].queue_time + p.path[i].tx_time + p.path[i].prop_time;
            if (i > 0) {
                increasing = increasing && p.path[i - 1].arrival < p.path[i].arrival;
            }
        }
        CHECK(increasing);
        CHECK(p.path.back().node == p.dst);
        CHECK(*p.delivered_at - p.created == sum);
        CHECK(sum == p.queue_total + p.tx_total + p.prop_total);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("queueing vanishes at low load") {
    const LoadedRun r = loaded_run(3, 0.005, 100, 600.0);
    double queue = 0.0;
    double e2e = 0.0;
    for (const Packet& p : r.packets) {
        if (p.status == PacketStatus::delivered) {
            queue += p.queue_total.seconds();
            e2e += (*p.delivered_at - p.created).seconds();
        }
    }
    REQUIRE(e2e > 0.0);
    CHECK(queue / e2e < 0.01);
}
