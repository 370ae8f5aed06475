#include "leosim/routing_rl.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace leosim {

namespace {

constexpr std::array<Action, kNumActions> kActions{Action::intra_forward, Action::intra_backward,
                                                   Action::inter_east, Action::inter_west,
                                                   Action::down_to_gateway};

int count_valid(const ActionMask& mask) { return static_cast<int>(std::count(mask.begin(), mask.end(), true)); }

// k-th valid action in index order.
int nth_valid(const ActionMask& mask, std::uint64_t k) {
    for (int a = 0; a < kNumActions; ++a) {
        if (mask[static_cast<std::size_t>(a)] && k-- == 0) {
            return a;
        }
    }
    throw SimulationFault("nth_valid: index out of range");
}

bool is_terminal(HopOutcome o) { return o != HopOutcome::forwarded; }

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Signed ring offset in (-n/2, n/2], scaled to (-1, 1].
double ring_offset(int from, int to, int n) {
    if (n <= 1) {
        return 0.0;
    }
    int d = ((to - from) % n + n) % n;
    if (2 * d > n) {
        d -= n;
    }
    return static_cast<double>(d) / (static_cast<double>(n) / 2.0);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

} // namespace

ActionMask valid_actions(const TopologySnapshot& snapshot, NodeId sat, NodeId dst) {
    ActionMask mask{};
    if (snapshot.is_gateway(sat)) {
        return mask;
    }
    for (Action a : kActions) {
        const int e = snapshot.slot_edge(sat, a);
        if (e < 0) {
            continue;
        }
        const Edge& edge = snapshot.edges()[static_cast<std::size_t>(e)];
        if (edge.rate_from(sat) <= 0.0) {
            continue;
        }
        if (a == Action::down_to_gateway && edge.other(sat) != dst) {
            continue;
        }
        mask[static_cast<std::size_t>(a)] = true;
    }
    return mask;
}

NodeId action_target(const TopologySnapshot& snapshot, NodeId sat, Action action) {
    const int e = snapshot.slot_edge(sat, action);
    if (e < 0) {
        throw SimulationFault("action " + std::to_string(static_cast<int>(action)) + " has no link at node " +
                              std::to_string(sat));
    }
    return snapshot.edges()[static_cast<std::size_t>(e)].other(sat);
}

std::optional<NodeId> gateway_uplink(const TopologySnapshot& snapshot, NodeId gateway) {
    for (int e : snapshot.incident(gateway)) {
        const Edge& edge = snapshot.edges()[static_cast<std::size_t>(e)];
        if (edge.kind == LinkKind::gsl && edge.rate_from(gateway) > 0.0) {
            return edge.other(gateway);
        }
    }
    return std::nullopt;
}

double EpsilonSchedule::at(std::uint64_t step) const {
    if (horizon == 0 || step >= horizon) {
        return end;
    }
    const double frac = static_cast<double>(step) / static_cast<double>(horizon);
    return start + (end - start) * frac;
}

void EpsilonSchedule::validate() const {
    if (!(start >= 0.0 && start <= 1.0)) {
        throw ConfigError("learning.epsilon_start", "must lie in [0, 1]");
    }
    if (!(end >= 0.0 && end <= 1.0)) {
        throw ConfigError("learning.epsilon_end", "must lie in [0, 1]");
    }
    if (end > start) {
        throw ConfigError("learning.epsilon_end", "must not exceed epsilon_start");
    }
}

void RewardSpec::validate() const {
    if (!std::isfinite(delivery_bonus) || !(delivery_bonus > 0.0)) {
        throw ConfigError("learning.delivery_bonus", "must be finite and positive");
    }
    if (!std::isfinite(hop_cost) || hop_cost < 0.0) {
        throw ConfigError("learning.hop_cost", "must be finite and non-negative");
    }
    if (!std::isfinite(drop_penalty) || !(drop_penalty < 0.0)) {
        throw ConfigError("learning.drop_penalty", "must be finite and negative");
    }
}

double RewardSpec::reward(const HopFeedback& feedback) const {
    double r = -hop_cost * feedback.latency().seconds();
    switch (feedback.outcome) {
    case HopOutcome::delivered:
        r += delivery_bonus;
        break;
    case HopOutcome::dropped:
    case HopOutcome::stuck:
        r += drop_penalty;
        break;
    case HopOutcome::forwarded:
        break;
    }
    return r;
}

void LearningLog::add_reward(double sim_time_s, double reward) {
    ++hops_;
    ++pending_;
    pending_sum_ += reward;
    last_time_ = sim_time_s;
    if (pending_ == kRewardWindow) {
        flush();
    }
}

void LearningLog::add_decision(std::uint64_t step, double sim_time_s, double epsilon) {
    if (step % kEpsilonEvery == 0) {
        epsilon_.push_back({step, sim_time_s, epsilon});
    }
}

void LearningLog::flush() {
    if (pending_ == 0) {
        return;
    }
    rewards_.push_back({hops_, last_time_, pending_sum_ / static_cast<double>(pending_)});
    pending_ = 0;
    pending_sum_ = 0.0;
}

// ---------------------------------------------------------------- Q-Routing

QTable::QTable(int num_satellites, int num_gateways, double initial)
    : num_satellites_(num_satellites), num_gateways_(num_gateways),
      values_(static_cast<std::size_t>(num_satellites) * static_cast<std::size_t>(num_gateways) * kNumActions,
              initial) {
    if (num_satellites < 0 || num_gateways < 0) {
        throw std::invalid_argument("QTable: negative dimensions");
    }
}

std::size_t QTable::index(NodeId sat, int dst_gw, Action a) const {
    if (sat < 0 || sat >= num_satellites_ || dst_gw < 0 || dst_gw >= num_gateways_) {
        throw SimulationFault("QTable: index out of range (sat " + std::to_string(sat) + ", gw " +
                              std::to_string(dst_gw) + ")");
    }
    return (static_cast<std::size_t>(sat) * static_cast<std::size_t>(num_gateways_) +
            static_cast<std::size_t>(dst_gw)) *
               kNumActions +
           static_cast<std::size_t>(a);
}

double& QTable::at(NodeId sat, int dst_gw, Action a) { return values_[index(sat, dst_gw, a)]; }
double QTable::at(NodeId sat, int dst_gw, Action a) const { return values_[index(sat, dst_gw, a)]; }

std::optional<double> QTable::min_valid(NodeId sat, int dst_gw, const ActionMask& mask) const {
    std::optional<double> best;
    for (Action a : kActions) {
        if (mask[static_cast<std::size_t>(a)]) {
            const double v = at(sat, dst_gw, a);
            if (!best || v < *best) {
                best = v;
            }
        }
    }
    return best;
}

void QTable::save_csv(const std::filesystem::path& path) const {
    std::string out = "sat_id,dst_gw,action,value\n";
    for (int s = 0; s < num_satellites_; ++s) {
        for (int g = 0; g < num_gateways_; ++g) {
            for (Action a : kActions) {
                out += std::to_string(s) + ',' + std::to_string(g) + ',' + std::to_string(static_cast<int>(a)) + ',' +
                       format_double(at(s, g, a)) + '\n';
            }
        }
    }
    write_file(path, out);
}

QTable QTable::load_csv(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t cs = csv.column("sat_id");
    const std::size_t cg = csv.column("dst_gw");
    const std::size_t ca = csv.column("action");
    const std::size_t cv = csv.column("value");
    long long max_s = -1;
    long long max_g = -1;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        max_s = std::max(max_s, csv.integer(r, cs));
        max_g = std::max(max_g, csv.integer(r, cg));
    }
    QTable table(static_cast<int>(max_s + 1), static_cast<int>(max_g + 1));
    if (csv.rows.size() != table.values_.size()) {
        throw LoadError(path.string() + ": expected " + std::to_string(table.values_.size()) + " rows, found " +
                        std::to_string(csv.rows.size()));
    }
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const long long s = csv.integer(r, cs);
        const long long g = csv.integer(r, cg);
        const long long a = csv.integer(r, ca);
        if (s < 0 || g < 0 || a < 0 || a >= kNumActions) {
            throw LoadError(path.string() + ": bad index on row " + std::to_string(r + 2));
        }
        table.at(static_cast<int>(s), static_cast<int>(g), static_cast<Action>(a)) = csv.number(r, cv);
    }
    return table;
}

std::optional<Action> q_route_select(const QTable& table, NodeId sat, int dst_gw, const ActionMask& mask,
                                     double epsilon, Rng& rng) {
    const int n = count_valid(mask);
    if (n == 0) {
        return std::nullopt;
    }
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
        return static_cast<Action>(nth_valid(mask, rng.below(static_cast<std::uint64_t>(n))));
    }
    std::optional<Action> best;
    double best_v = 0.0;
    for (Action a : kActions) {
        if (!mask[static_cast<std::size_t>(a)]) {
            continue;
        }
        const double v = table.at(sat, dst_gw, a);
        if (!best || v < best_v) {
            best = a;
            best_v = v;
        }
    }
    return best;
}

void q_update(QTable& table, const QExperience& exp, double alpha, double gamma) {
    double& q = table.at(exp.sat, exp.dst_gw, exp.action);
    const double bootstrap = exp.terminal ? 0.0 : gamma * exp.neighbor_estimate;
    q = (1.0 - alpha) * q + alpha * (exp.cost + bootstrap);
}

void QRoutingParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("learning.alpha", "must lie in (0, 1]");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw ConfigError("learning.gamma", "must lie in [0, 1]");
    }
    epsilon.validate();
    reward.validate();
}

QRoutingPolicy::QRoutingPolicy(int num_satellites, int num_gateways, QRoutingParams params, std::uint64_t seed,
                               std::optional<QTable> initial)
    : params_(params), table_(num_satellites, num_gateways), explore_rng_(seed, "q_explore", 0) {
    params_.validate();
    if (initial) {
        if (initial->num_satellites() != num_satellites || initial->num_gateways() != num_gateways) {
            throw ConfigError("learning.import", "Q-table dimensions do not match the scenario");
        }
        table_ = std::move(*initial);
    }
}

std::optional<NodeId> QRoutingPolicy::next_hop(const NetworkView& view, NodeId node, const PacketView& packet) {
    const TopologySnapshot& snap = view.snapshot();
    if (snap.is_gateway(node)) {
        return gateway_uplink(snap, node);
    }
    const ActionMask mask = valid_actions(snap, node, packet.dst);
    const double eps = params_.epsilon.at(decisions_);
    log_.add_decision(decisions_, view.now().seconds(), eps);
    ++decisions_;
    const auto action = q_route_select(table_, node, snap.gateway_index(packet.dst), mask, eps, explore_rng_);
    if (!action) {
        return std::nullopt;
    }
    pending_[packet.id] = {node, *action};
    return action_target(snap, node, *action);
}

std::optional<int> QRoutingPolicy::on_hop(const NetworkView& view, const HopFeedback& feedback) {
    const auto it = pending_.find(feedback.packet_id);
    if (it == pending_.end()) {
        return std::nullopt; // uplink from a gateway
    }
    const Pending p = it->second;
    pending_.erase(it);
    if (p.sat != feedback.from) {
        throw SimulationFault("Q-Routing feedback from an unexpected node");
    }
    const TopologySnapshot& snap = view.snapshot();
    const int dst_gw = snap.gateway_index(feedback.dst);
    const double r = params_.reward.reward(feedback);
    QExperience exp{p.sat, dst_gw, p.action, -r, 0.0, is_terminal(feedback.outcome)};
    if (!exp.terminal && !snap.is_gateway(feedback.to)) {
        const auto est = table_.min_valid(feedback.to, dst_gw, valid_actions(snap, feedback.to, feedback.dst));
        exp.neighbor_estimate = est.value_or(0.0);
    }
    q_update(table_, exp, params_.alpha, params_.gamma);
    ++updates_;
    log_.add_reward(view.now().seconds(), r);
    return std::nullopt;
}

// ------------------------------------------------------------------ MA-DRL

AgentState observe(const NetworkView& view, NodeId sat, NodeId dst, double rate_norm_bps) {
    const TopologySnapshot& snap = view.snapshot();
    AgentState st;
    st.features.assign(kStateSize, 0.0);
    st.valid = valid_actions(snap, sat, dst);

    const GridLayout& layout = snap.layout();
    const SatId self = snap.sat_id(sat);
    if (const auto serving = snap.gateway_satellite(snap.gateway_index(dst))) {
        const SatId target = snap.sat_id(*serving);
        if (layout.walker == WalkerKind::delta) {
            st.features[0] = ring_offset(self.plane, target.plane, layout.num_planes);
        } else if (layout.num_planes > 1) {
            st.features[0] = static_cast<double>(target.plane - self.plane) / (layout.num_planes - 1);
        }
        st.features[1] = ring_offset(self.index, target.index, layout.sats_per_plane);
    }
    const auto& pos = snap.positions();
    if (static_cast<std::size_t>(dst) < pos.size()) {
        const Vec3 d = pos[static_cast<std::size_t>(dst)];
        const double n = d.norm();
        if (n > 0.0) {
            st.features[2] = d.x / n;
            st.features[3] = d.y / n;
            st.features[4] = d.z / n;
        }
    }
    const int cap = view.queue_capacity();
    for (Action a : kActions) {
        const std::size_t base = 5 + 4 * static_cast<std::size_t>(a);
        const int e = snap.slot_edge(sat, a);
        if (e < 0 || !st.valid[static_cast<std::size_t>(a)]) {
            continue;
        }
        const Edge& edge = snap.edges()[static_cast<std::size_t>(e)];
        const NodeId nb = edge.other(sat);
        const double q = cap > 0 ? static_cast<double>(view.queue_length(nb)) / cap : 1.0;
        st.features[base] = std::clamp(q, 0.0, 1.0);
        st.features[base + 1] = std::clamp(edge.distance_m / kDistanceNorm, 0.0, 1.0);
        st.features[base + 2] = rate_norm_bps > 0.0 ? std::clamp(edge.rate_from(sat) / rate_norm_bps, 0.0, 1.0) : 0.0;
        st.features[base + 3] = 1.0;
    }
    for (double& f : st.features) {
        f = clamp_unit(f);
    }
    return st;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw ConfigError("learning.replay_capacity", "must be positive");
    }
}

void ReplayBuffer::push(Experience exp) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(exp));
    } else {
        items_[next_] = std::move(exp);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
    if (n > items_.size()) {
        throw SimulationFault("replay sample larger than the buffer");
    }
    // Partial Fisher-Yates over the index range.
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

std::optional<int> greedy_action(std::span<const double> values, const ActionMask& mask) {
    std::optional<int> best;
    for (int a = 0; a < kNumActions && a < static_cast<int>(values.size()); ++a) {
        if (mask[static_cast<std::size_t>(a)] && (!best || values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(*best)])) {
            best = a;
        }
    }
    return best;
}

double ddqn_target(const MlpModel& online, const MlpModel& target, const Experience& exp, double gamma,
                   bool double_q) {
    if (exp.terminal || count_valid(exp.next_valid) == 0) {
        return exp.reward;
    }
    const std::vector<double> qt = target.forward(exp.next_state);
    int a;
    if (double_q) {
        a = *greedy_action(online.forward(exp.next_state), exp.next_valid);
    } else {
        a = *greedy_action(qt, exp.next_valid);
    }
    return exp.reward + gamma * qt[static_cast<std::size_t>(a)];
}

std::string_view to_string(MadrlPhase phase) { return phase == MadrlPhase::offline ? "offline" : "online"; }

MadrlPhase parse_madrl_phase(std::string_view text) {
    if (text == "offline") {
        return MadrlPhase::offline;
    }
    if (text == "online") {
        return MadrlPhase::online;
    }
    throw ConfigError("learning.phase", "expected offline or online, got '" + std::string(text) + "'");
}

void MadrlParams::validate() const {
    for (int h : hidden) {
        if (h <= 0) {
            throw ConfigError("learning.hidden", "layer widths must be positive");
        }
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning.learning_rate", "must be finite and non-negative");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw ConfigError("learning.gamma", "must lie in [0, 1]");
    }
    if (batch_size == 0) {
        throw ConfigError("learning.batch_size", "must be positive");
    }
    if (replay_capacity < batch_size) {
        throw ConfigError("learning.replay_capacity", "must be at least batch_size");
    }
    if (target_sync == 0) {
        throw ConfigError("learning.target_sync", "must be positive");
    }
    if (train_interval == 0) {
        throw ConfigError("learning.train_interval", "must be positive");
    }
    epsilon.validate();
    reward.validate();
}

std::vector<int> MadrlParams::layer_sizes() const {
    std::vector<int> sizes{kStateSize};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(kNumActions);
    return sizes;
}

MadrlPolicy::MadrlPolicy(int num_satellites, double rate_norm_bps, MadrlParams params, std::uint64_t seed,
                         std::optional<ModelPair> initial)
    : num_satellites_(num_satellites), rate_norm_(rate_norm_bps), params_(std::move(params)), seed_(seed),
      explore_rng_(seed, "madrl_explore", 0), probe_rng_(seed, "probe", 0) {
    params_.validate();
    if (num_satellites <= 0) {
        throw ConfigError("constellation", "MA-DRL needs at least one satellite");
    }
    const std::vector<int> sizes = params_.layer_sizes();
    if (initial) {
        if (initial->online.layer_sizes() != sizes || initial->target.layer_sizes() != sizes) {
            throw ConfigError("learning.import", "imported model architecture does not match");
        }
        initial_ = std::move(*initial);
        imported_ = true;
    } else {
        Rng init(seed, "model_init", 0);
        initial_.online = MlpModel::random(sizes, init);
        initial_.target = initial_.online;
    }
    agents_.resize(params_.phase == MadrlPhase::offline ? 1 : static_cast<std::size_t>(num_satellites));
}

MadrlPolicy::Agent& MadrlPolicy::agent(int id) {
    auto& slot = agents_.at(static_cast<std::size_t>(id));
    if (!slot) {
        slot = std::make_unique<Agent>(Agent{initial_, ReplayBuffer(params_.replay_capacity), 0, 0,
                                             Rng(seed_, "replay", static_cast<std::uint64_t>(id))});
    }
    return *slot;
}

const ModelPair& MadrlPolicy::models(NodeId sat) const {
    const auto& slot = agents_.at(static_cast<std::size_t>(agent_id(sat)));
    return slot ? slot->nets : initial_;
}

std::uint64_t MadrlPolicy::train_steps(int agent) const {
    const auto& slot = agents_.at(static_cast<std::size_t>(agent));
    return slot ? slot->steps : 0;
}

void MadrlPolicy::remember_probe(const std::vector<double>& state) {
    // Reservoir sampling keeps a uniform subset of all observed states.
    ++probes_seen_;
    if (probes_.size() < params_.probe_count) {
        probes_.push_back(state);
        return;
    }
    if (params_.probe_count == 0) {
        return;
    }
    const std::uint64_t j = probe_rng_.below(probes_seen_);
    if (j < params_.probe_count) {
        probes_[static_cast<std::size_t>(j)] = state;
    }
}

std::optional<NodeId> MadrlPolicy::next_hop(const NetworkView& view, NodeId node, const PacketView& packet) {
    const TopologySnapshot& snap = view.snapshot();
    if (snap.is_gateway(node)) {
        return gateway_uplink(snap, node);
    }
    AgentState st = observe(view, node, packet.dst, rate_norm_);
    const double eps = params_.epsilon.at(decisions_);
    log_.add_decision(decisions_, view.now().seconds(), eps);
    ++decisions_;
    const int n = count_valid(st.valid);
    if (n == 0) {
        return std::nullopt;
    }
    int action;
    if (eps > 0.0 && explore_rng_.uniform() < eps) {
        action = nth_valid(st.valid, explore_rng_.below(static_cast<std::uint64_t>(n)));
    } else {
        action = *greedy_action(models(node).online.forward(st.features), st.valid);
    }
    if (!st.valid[static_cast<std::size_t>(action)]) {
        ++masked_selections_;
        throw SimulationFault("MA-DRL selected a masked action");
    }
    const NodeId next = action_target(snap, node, static_cast<Action>(action));
    pending_[packet.id] = {agent_id(node), std::move(st.features), action};
    return next;
}

std::optional<int> MadrlPolicy::on_hop(const NetworkView& view, const HopFeedback& feedback) {
    const auto it = pending_.find(feedback.packet_id);
    if (it == pending_.end()) {
        return std::nullopt;
    }
    Pending p = std::move(it->second);
    pending_.erase(it);

    Experience exp;
    exp.action = p.action;
    exp.reward = params_.reward.reward(feedback);
    exp.terminal = is_terminal(feedback.outcome) || view.snapshot().is_gateway(feedback.to);
    if (exp.terminal) {
        exp.next_state.assign(kStateSize, 0.0);
    } else {
        AgentState next = observe(view, feedback.to, feedback.dst, rate_norm_);
        exp.next_state = std::move(next.features);
        exp.next_valid = next.valid;
    }
    exp.state = std::move(p.state);
    remember_probe(exp.state);
    log_.add_reward(view.now().seconds(), exp.reward);

    Agent& a = agent(p.agent);
    a.buffer.push(std::move(exp));
    ++a.experiences;
    ++experiences_;
    // A zero learning rate is frozen exploitation: no training events at all.
    if (params_.learning_rate > 0.0 && a.buffer.size() >= params_.batch_size &&
        a.experiences % params_.train_interval == 0) {
        return p.agent;
    }
    return std::nullopt;
}

void MadrlPolicy::train_step(int id) {
    Agent& a = agent(id);
    if (a.buffer.size() < params_.batch_size) {
        return;
    }
    QBatch batch;
    for (std::size_t i : a.buffer.sample_indices(params_.batch_size, a.replay_rng)) {
        const Experience& e = a.buffer.at(i);
        batch.states.push_back(e.state);
        batch.actions.push_back(e.action);
        batch.targets.push_back(ddqn_target(a.nets.online, a.nets.target, e, params_.gamma, params_.double_q));
    }
    const std::vector<double> grad = mlp_backward(a.nets.online, batch);
    sgd_step(a.nets.online, grad, params_.learning_rate);
    ++a.steps;
    if (a.steps % params_.target_sync == 0) {
        a.nets.target = a.nets.online;
    }
}

void save_probe_states(const std::vector<std::vector<double>>& probes, const std::filesystem::path& path) {
    const std::size_t d = probes.empty() ? kStateSize : probes.front().size();
    std::string out;
    for (std::size_t i = 0; i < d; ++i) {
        out += (i ? ",f" : "f") + std::to_string(i);
    }
    out += '\n';
    for (const auto& row : probes) {
        if (row.size() != d) {
            throw SimulationFault("probe states of differing width");
        }
        for (std::size_t i = 0; i < d; ++i) {
            if (i) {
                out += ',';
            }
            out += format_double(row[i]);
        }
        out += '\n';
    }
    write_file(path, out);
}

std::vector<std::vector<double>> load_probe_states(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    std::vector<std::vector<double>> probes;
    probes.reserve(csv.rows.size());
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        if (csv.rows[r].size() != csv.header.size()) {
            throw LoadError(path.string() + ": ragged row " + std::to_string(r + 2));
        }
        std::vector<double> row(csv.header.size());
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] = csv.number(r, c);
        }
        probes.push_back(std::move(row));
    }
    return probes;
}

} // namespace leosim
