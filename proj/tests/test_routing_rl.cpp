#include "leosim/errors.hpp"
#include "leosim/routing_classic.hpp"
#include "leosim/routing_rl.hpp"

#include "support/small_grid.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace leosim;
using namespace leosim::testing;

namespace {

class StaticView final : public NetworkView {
public:
    explicit StaticView(TopologySnapshot s) : snap(std::move(s)), queues(static_cast<std::size_t>(snap.num_nodes()), 0) {}
    const TopologySnapshot& snapshot() const override { return snap; }
    int queue_length(NodeId node) const override { return queues[static_cast<std::size_t>(node)]; }
    int queue_capacity() const override { return 100; }
    SimTime now() const override { return t; }

    TopologySnapshot snap;
    std::vector<int> queues;
    SimTime t;
};

ActionMask mask_of(std::initializer_list<int> valid) {
    ActionMask m{};
    for (int a : valid) {
        m[static_cast<std::size_t>(a)] = true;
    }
    return m;
}

std::uint64_t param_hash(const MlpModel& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : m.parameters()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = (h ^ bits) * 0x100000001b3ULL;
    }
    return h;
}

double param_distance(const MlpModel& a, const MlpModel& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.num_parameters(); ++i) {
        d += (a.parameters()[i] - b.parameters()[i]) * (a.parameters()[i] - b.parameters()[i]);
    }
    return std::sqrt(d);
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "leosim_test_rl";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("action masks follow the snapshot") {
    const TopologySnapshot g = small_grid();
    // Satellite 0 = (0, 0): both intra links, the eastern neighbour, the
    // gateway G0. A star grid has no western neighbour for plane 0.
    CHECK(valid_actions(g, 0, kGridG0) == mask_of({0, 1, 2, 4}));
    CHECK(valid_actions(g, 0, kGridG1) == mask_of({0, 1, 2}));
    CHECK(valid_actions(g, 5, kGridG1) == mask_of({0, 1, 3}));
    CHECK(valid_actions(g, kGridG0, kGridG1) == mask_of({}));
    CHECK(action_target(g, 0, Action::intra_forward) == 1);
    CHECK(action_target(g, 0, Action::intra_backward) == 3);
    CHECK(action_target(g, 0, Action::inter_east) == 4);
    CHECK(action_target(g, 4, Action::inter_west) == 0);
    CHECK(action_target(g, 6, Action::down_to_gateway) == kGridG1);
    CHECK_THROWS_AS(action_target(g, 0, Action::inter_west), SimulationFault);
    CHECK(gateway_uplink(g, kGridG0) == 0);

    // A zero-rate direction masks the action.
    TopologySnapshot z = small_grid();
    z.set_rates(static_cast<std::size_t>(z.find_edge(0, 1)), 0.0, kGridIslRate);
    CHECK(valid_actions(z, 0, kGridG1) == mask_of({1, 2}));
    CHECK(valid_actions(z, 1, kGridG1)[1]);
}

TEST_CASE("Q-Routing selection") {
    QTable t(8, 2);
    Rng rng(1);
    const ActionMask m = mask_of({0, 1, 2});

    SUBCASE("greedy picks the cheapest valid action") {
        t.at(0, 1, Action::intra_forward) = 10.0;
        t.at(0, 1, Action::intra_backward) = 1.0;
        t.at(0, 1, Action::inter_east) = 10.0;
        t.at(0, 1, Action::down_to_gateway) = -50.0; // masked
        for (int i = 0; i < 100; ++i) {
            CHECK(q_route_select(t, 0, 1, m, 0.0, rng) == Action::intra_backward);
        }
    }
    SUBCASE("ties go to the lowest index") {
        CHECK(q_route_select(t, 0, 1, m, 0.0, rng) == Action::intra_forward);
        CHECK(q_route_select(t, 0, 1, mask_of({2, 3}), 0.0, rng) == Action::inter_east);
    }
    SUBCASE("epsilon = 1 is uniform over valid actions") {
        std::array<int, kNumActions> counts{};
        const int n = 10'000;
        for (int i = 0; i < n; ++i) {
            ++counts[static_cast<std::size_t>(*q_route_select(t, 0, 1, m, 1.0, rng))];
        }
        CHECK(counts[3] == 0);
        CHECK(counts[4] == 0);
        double chi2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double e = n / 3.0;
            chi2 += (counts[static_cast<std::size_t>(a)] - e) * (counts[static_cast<std::size_t>(a)] - e) / e;
        }
        CHECK(chi2 < 13.82); // 2 degrees of freedom, p = 0.001
    }
    SUBCASE("no valid action") {
        CHECK_FALSE(q_route_select(t, 0, 1, mask_of({}), 0.3, rng));
    }
}

TEST_CASE("Q-Routing update rule") {
    QTable t(2, 2, 4.0);
    QExperience e{1, 0, Action::inter_west, 0.5, 3.0, false};
    q_update(t, e, 0.0, 0.9);
    CHECK(t.at(1, 0, Action::inter_west) == 4.0);
    q_update(t, e, 0.5, 0.9);
    CHECK(t.at(1, 0, Action::inter_west) == doctest::Approx(0.5 * 4.0 + 0.5 * (0.5 + 0.9 * 3.0)));
    e.terminal = true;
    q_update(t, e, 1.0, 0.9);
    CHECK(t.at(1, 0, Action::inter_west) == 0.5);
    CHECK(t.at(0, 0, Action::inter_west) == 4.0);

    QRoutingParams p;
    p.alpha = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("Q-table CSV round trip") {
    Rng rng(5);
    QTable t(8, 2);
    for (int s = 0; s < 8; ++s) {
        for (int g = 0; g < 2; ++g) {
            for (int a = 0; a < kNumActions; ++a) {
                t.at(s, g, static_cast<Action>(a)) = rng.uniform(-3.0, 3.0);
            }
        }
    }
    const auto path = scratch("q.csv");
    t.save_csv(path);
    CHECK(QTable::load_csv(path) == t);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "sat_id,dst_gw,action,value");

    std::ofstream(scratch("short.csv")) << "sat_id,dst_gw,action,value\n0,0,0,1.5\n";
    CHECK_THROWS_AS(QTable::load_csv(scratch("short.csv")), LoadError);
}

TEST_CASE("epsilon schedule and rewards") {
    EpsilonSchedule e{1.0, 0.05, 1000};
    CHECK(e.at(0) == 1.0);
    CHECK(e.at(500) == doctest::Approx(0.525));
    CHECK(e.at(1000) == 0.05);
    CHECK(e.at(1'000'000) == 0.05);
    double prev = 2.0;
    for (std::uint64_t s = 0; s < 2000; s += 7) {
        CHECK(e.at(s) <= prev);
        prev = e.at(s);
    }
    EpsilonSchedule bad{0.1, 0.5, 10};
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    RewardSpec r;
    HopFeedback fb;
    fb.tx_time = SimTime::from_seconds(0.001);
    fb.prop_time = SimTime::from_seconds(0.009);
    fb.outcome = HopOutcome::forwarded;
    CHECK(r.reward(fb) == doctest::Approx(-0.010));
    fb.outcome = HopOutcome::delivered;
    CHECK(r.reward(fb) == doctest::Approx(1.990));
    fb.outcome = HopOutcome::dropped;
    CHECK(r.reward(fb) == doctest::Approx(-2.010));
    fb.outcome = HopOutcome::stuck;
    CHECK(r.reward(fb) == doctest::Approx(-2.010));
    RewardSpec positive_penalty;
    positive_penalty.drop_penalty = 1.0;
    CHECK_THROWS_AS(positive_penalty.validate(), ConfigError);
    RewardSpec no_bonus;
    no_bonus.delivery_bonus = 0.0;
    CHECK_THROWS_AS(no_bonus.validate(), ConfigError);
}

TEST_CASE("learning log windows") {
    LearningLog log;
    for (int i = 0; i < 250; ++i) {
        log.add_reward(0.01 * i, i < 100 ? 1.0 : -1.0);
        log.add_decision(static_cast<std::uint64_t>(i), 0.01 * i, 1.0 - 0.001 * i);
    }
    REQUIRE(log.rewards().size() == 2);
    CHECK(log.rewards()[0].reward == 1.0);
    CHECK(log.rewards()[0].step == 100);
    CHECK(log.rewards()[1].reward == -1.0);
    log.flush();
    REQUIRE(log.rewards().size() == 3);
    CHECK(log.rewards()[2].step == 250);
    CHECK(log.hops() == 250);
    REQUIRE(log.epsilon().size() == 3);
    CHECK(log.epsilon()[2].step == 200);
    CHECK(log.epsilon()[2].epsilon == doctest::Approx(0.8));
}

TEST_CASE("observations stay in range and zero invalid links") {
    StaticView v(small_grid());
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        for (int n = 0; n < v.snap.num_nodes(); ++n) {
            v.queues[static_cast<std::size_t>(n)] = static_cast<int>(rng.below(150));
        }
        for (NodeId sat = 0; sat < 8; ++sat) {
            for (NodeId dst : {kGridG0, kGridG1}) {
                const AgentState s = observe(v, sat, dst, kGridIslRate);
                REQUIRE(s.features.size() == static_cast<std::size_t>(kStateSize));
                for (double f : s.features) {
                    CHECK(f >= -1.0);
                    CHECK(f <= 1.0);
                }
                for (int a = 0; a < kNumActions; ++a) {
                    const std::size_t base = 5 + 4 * static_cast<std::size_t>(a);
                    if (!s.valid[static_cast<std::size_t>(a)]) {
                        CHECK(s.features[base] == 0.0);
                        CHECK(s.features[base + 1] == 0.0);
                        CHECK(s.features[base + 2] == 0.0);
                        CHECK(s.features[base + 3] == 0.0);
                    } else {
                        CHECK(s.features[base + 3] == 1.0);
                    }
                }
            }
        }
    }
    const AgentState s = observe(v, 0, kGridG1, kGridIslRate);
    CHECK(s.features[0] == 1.0);  // destination in the other plane
    CHECK(s.features[1] == 1.0);  // two slots ahead in a ring of four
    CHECK(s.features[5 + 2] == 1.0); // forward ISL at the normalising rate
    CHECK(s.features[5 + 1] == doctest::Approx(3000e3 / kDistanceNorm));
}

TEST_CASE("replay buffer") {
    ReplayBuffer b(3);
    for (int i = 0; i < 5; ++i) {
        Experience e;
        e.action = i;
        b.push(e);
    }
    CHECK(b.size() == 3);
    std::vector<int> held;
    for (std::size_t i = 0; i < b.size(); ++i) {
        held.push_back(b.at(i).action);
    }
    std::sort(held.begin(), held.end());
    CHECK(held == std::vector<int>{2, 3, 4});

    ReplayBuffer big(10);
    for (int i = 0; i < 10; ++i) {
        big.push(Experience{});
    }
    Rng rng(9);
    std::array<int, 10> hits{};
    for (int k = 0; k < 20'000; ++k) {
        auto idx = big.sample_indices(4, rng);
        std::sort(idx.begin(), idx.end());
        CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
        for (std::size_t i : idx) {
            ++hits[i];
        }
    }
    for (int h : hits) {
        CHECK(std::abs(h - 8000) < 400);
    }
    CHECK_THROWS_AS(big.sample_indices(11, rng), SimulationFault);
    CHECK_THROWS_AS(ReplayBuffer(0), ConfigError);
}

TEST_CASE("greedy action") {
    const std::vector<double> q{0.5, 2.0, 2.0, -1.0, 9.0};
    CHECK(greedy_action(q, mask_of({0, 1, 2, 3})) == 1);
    CHECK(greedy_action(q, mask_of({0, 3})) == 0);
    CHECK_FALSE(greedy_action(q, mask_of({})));
}

TEST_CASE("DDQN and DQN targets") {
    // No hidden layer and zero weights: the outputs are the biases.
    MlpModel online({kStateSize, kNumActions});
    MlpModel target({kStateSize, kNumActions});
    online.bias(0, 0) = 1.0;
    target.bias(0, 1) = 1.0;
    Experience e;
    e.reward = 0.25;
    e.next_state.assign(kStateSize, 0.3);
    e.next_valid = mask_of({0, 1});
    const double gamma = 0.75; // dyadic, so the gap is exact

    const double ddqn = ddqn_target(online, target, e, gamma, true);
    const double dqn = ddqn_target(online, target, e, gamma, false);
    CHECK(ddqn == 0.25);
    CHECK(dqn == 0.25 + gamma);
    CHECK(dqn - ddqn == gamma * (target.bias(0, 1) - target.bias(0, 0)));

    CHECK(ddqn_target(target, target, e, gamma, true) == ddqn_target(target, target, e, gamma, false));
    e.terminal = true;
    CHECK(ddqn_target(online, target, e, gamma, true) == 0.25);
    e.terminal = false;
    e.next_valid = mask_of({});
    CHECK(ddqn_target(online, target, e, gamma, false) == 0.25);
}

TEST_CASE("phase parsing and parameter validation") {
    CHECK(parse_madrl_phase("online") == MadrlPhase::online);
    CHECK(to_string(MadrlPhase::offline) == "offline");
    try {
        parse_madrl_phase("federated");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "learning.phase");
    }
    MadrlParams p;
    CHECK(p.layer_sizes() == std::vector<int>{25, 64, 64, 5});
    p.replay_capacity = 8;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    MadrlParams wrong;
    wrong.hidden = {32};
    CHECK_THROWS_AS(MadrlPolicy(8, 1.0, MadrlParams{}, 1, ModelPair{MlpModel(wrong.layer_sizes()), MlpModel(wrong.layer_sizes())}),
                    ConfigError);
}

TEST_CASE("target network only changes at synchronisation") {
    StaticView v(small_grid());
    MadrlParams p;
    p.hidden = {16, 16};
    p.batch_size = 4;
    p.target_sync = 7;
    p.learning_rate = 0.05;
    MadrlPolicy pol(8, kGridIslRate, p, 3);
    std::uint64_t prev_target = param_hash(pol.models().target);
    int syncs = 0;
    for (PacketId id = 0; id < 200; ++id) {
        const NodeId sat = static_cast<NodeId>(id % 8);
        const PacketView pv{id, kGridG0, kGridG1, 1};
        const NodeId next = *pol.next_hop(v, sat, pv);
        CHECK(v.snap.find_edge(sat, next) >= 0);
        HopFeedback fb;
        fb.packet_id = id;
        fb.from = sat;
        fb.to = next;
        fb.dst = kGridG1;
        fb.prop_time = SimTime::from_seconds(0.01);
        fb.outcome = next == kGridG1 ? HopOutcome::delivered : HopOutcome::forwarded;
        if (const auto agent = pol.on_hop(v, fb)) {
            CHECK(*agent == 0);
            pol.train_step(*agent);
            const std::uint64_t h = param_hash(pol.models().target);
            if (pol.train_steps() % 7 == 0) {
                CHECK(h == param_hash(pol.models().online));
                ++syncs;
            } else {
                CHECK(h == prev_target);
            }
            prev_target = h;
        }
    }
    CHECK(pol.train_steps() > 150);
    CHECK(syncs == static_cast<int>(pol.train_steps() / 7));
    CHECK(pol.masked_selections() == 0);
    CHECK(pol.probe_states().size() == 200);
}

TEST_CASE("offline agents share one model, online agents diverge") {
    MadrlParams p;
    p.hidden = {16, 16};
    p.batch_size = 8;
    p.learning_rate = 0.01;
    p.epsilon = {1.0, 0.1, 2000};

    MadrlPolicy offline(8, kGridIslRate, p, 4);
    const GridRun a = run_on_grid(offline, 0.3, 1.0, 4);
    CHECK(a.delivered > 0);
    CHECK(&offline.models(0) == &offline.models(5));
    CHECK(offline.train_steps(0) > 0);

    p.phase = MadrlPhase::online;
    MadrlPolicy online(8, kGridIslRate, p, 4, offline.models());
    CHECK(online.started_from_import());
    const GridRun b = run_on_grid(online, 0.3, 1.0, 5);
    CHECK(b.counts.created == b.counts.delivered + b.counts.dropped + b.counts.stuck + b.counts.in_flight);
    std::vector<int> trained;
    for (int s = 0; s < 8; ++s) {
        if (online.train_steps(s) > 0) {
            trained.push_back(s);
        }
    }
    REQUIRE(trained.size() >= 2);
    for (std::size_t i = 0; i < trained.size(); ++i) {
        CHECK(param_distance(online.models(trained[i]).online, offline.models().online) > 0.0);
        for (std::size_t j = i + 1; j < trained.size(); ++j) {
            CHECK(param_distance(online.models(trained[i]).online, online.models(trained[j]).online) > 0.0);
        }
    }
}

TEST_CASE("online with lr = 0 replays frozen offline exploitation exactly") {
    MadrlParams p;
    p.hidden = {16, 16};
    p.batch_size = 8;
    p.learning_rate = 0.01;
    MadrlPolicy trainer(8, kGridIslRate, p, 2);
    run_on_grid(trainer, 0.3, 1.0, 2);
    const ModelPair frozen = trainer.models();

    p.learning_rate = 0.0;
    p.epsilon = {0.0, 0.0, 1};
    MadrlPolicy exploit(8, kGridIslRate, p, 7, frozen);
    p.phase = MadrlPhase::online;
    MadrlPolicy local(8, kGridIslRate, p, 7, frozen);
    const GridRun x = run_on_grid(exploit, 0.3, 2.0, 9);
    const GridRun y = run_on_grid(local, 0.3, 2.0, 9);
    CHECK(x.counts.created > 0);
    CHECK(x.trace_hash == y.trace_hash);
    CHECK(x.mean_e2e_s == y.mean_e2e_s);
    for (int s = 0; s < 8; ++s) {
        CHECK(local.train_steps(s) == 0);
        CHECK(param_hash(local.models(s).online) == param_hash(frozen.online));
    }
}

TEST_CASE("Q-Routing converges to the slant-range shortest path") {
    QRoutingParams qp;
    qp.epsilon = {1.0, 0.0, 20'000};
    QRoutingPolicy q(8, 2, qp, 11);
    const GridRun r = run_on_grid(q, 0.1, 30.0, 11);
    CHECK(r.fifo_violations == 0);
    CHECK(q.decisions() > 20'000);
    CHECK(q.current_epsilon() == 0.0);

    const TopologySnapshot g = small_grid();
    const RouteTable best = shortest_paths(g, WeightScheme::slant_range);
    int agree = 0;
    int total = 0;
    for (NodeId dst : {kGridG0, kGridG1}) {
        const NodeId src = dst == kGridG0 ? kGridG1 : kGridG0;
        const auto path = best.path(src, dst);
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
            const NodeId sat = path[i];
            Rng unused(0);
            const auto a = q_route_select(q.table(), sat, g.gateway_index(dst), valid_actions(g, sat, dst), 0.0, unused);
            REQUIRE(a);
            agree += action_target(g, sat, *a) == path[i + 1];
            ++total;
        }
    }
    CHECK(total == 8);
    CHECK(agree >= 0.95 * total);
}

TEST_CASE("probe states round trip") {
    std::vector<std::vector<double>> probes{{0.5, -1.0, 0.125}, {1e-9, 0.0, 1.0}};
    const auto path = scratch("probes.csv");
    save_probe_states(probes, path);
    CHECK(load_probe_states(path) == probes);
}
