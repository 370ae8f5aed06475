#pragma once

#include "leosim/mlp.hpp"
#include "leosim/policy.hpp"
#include "leosim/rng.hpp"
#include "leosim/topology.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace leosim {

// One action per satellite antenna.
using Action = LinkSlot;
inline constexpr int kNumActions = kNumLinkSlots;
using ActionMask = std::array<bool, kNumActions>;

// An action is valid when its link exists with a positive rate from `sat`;
// the down-link is valid only towards the packet's destination gateway.
ActionMask valid_actions(const TopologySnapshot& snapshot, NodeId sat, NodeId dst);
NodeId action_target(const TopologySnapshot& snapshot, NodeId sat, Action action);
// The satellite a gateway uplinks to, if the GSL carries traffic.
std::optional<NodeId> gateway_uplink(const TopologySnapshot& snapshot, NodeId gateway);

struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    std::uint64_t horizon = 10'000; // decisions over which epsilon decays linearly

    double at(std::uint64_t step) const;
    void validate() const;
};

struct RewardSpec {
    double delivery_bonus = 2.0;
    double hop_cost = 1.0;       // multiplies the one-hop latency in seconds
    double drop_penalty = -2.0;  // also applied when the hop limit is hit

    void validate() const;
    double reward(const HopFeedback& feedback) const;
};

struct RewardSample {
    std::uint64_t step = 0;
    double sim_time_s = 0.0;
    double reward = 0.0;
};

struct EpsilonSample {
    std::uint64_t step = 0;
    double sim_time_s = 0.0;
    double epsilon = 0.0;
};

// Rewards are logged as window means over consecutive hops.
class LearningLog {
public:
    static constexpr std::uint64_t kRewardWindow = 100;
    static constexpr std::uint64_t kEpsilonEvery = 100;

    void add_reward(double sim_time_s, double reward);
    void add_decision(std::uint64_t step, double sim_time_s, double epsilon);
    // Emits the partial reward window, if any.
    void flush();

    const std::vector<RewardSample>& rewards() const { return rewards_; }
    const std::vector<EpsilonSample>& epsilon() const { return epsilon_; }
    std::uint64_t hops() const { return hops_; }

private:
    std::vector<RewardSample> rewards_;
    std::vector<EpsilonSample> epsilon_;
    std::uint64_t hops_ = 0;
    std::uint64_t pending_ = 0;
    double pending_sum_ = 0.0;
    double last_time_ = 0.0;
};

// ---------------------------------------------------------------- Q-Routing

// Expected delivery cost (seconds-scale) per (satellite, destination gateway, action).
class QTable {
public:
    QTable() = default;
    QTable(int num_satellites, int num_gateways, double initial = 0.0);

    int num_satellites() const { return num_satellites_; }
    int num_gateways() const { return num_gateways_; }
    double& at(NodeId sat, int dst_gw, Action a);
    double at(NodeId sat, int dst_gw, Action a) const;
    // Minimum over valid actions; nullopt when none is valid.
    std::optional<double> min_valid(NodeId sat, int dst_gw, const ActionMask& mask) const;

    // CSV: sat_id,dst_gw,action,value
    void save_csv(const std::filesystem::path& path) const;
    static QTable load_csv(const std::filesystem::path& path);

    bool operator==(const QTable&) const = default;

private:
    std::size_t index(NodeId sat, int dst_gw, Action a) const;

    int num_satellites_ = 0;
    int num_gateways_ = 0;
    std::vector<double> values_;
};

// Epsilon-greedy over valid actions; greedy = lowest expected cost, ties to
// the lowest action index.
std::optional<Action> q_route_select(const QTable& table, NodeId sat, int dst_gw, const ActionMask& mask,
                                     double epsilon, Rng& rng);

struct QExperience {
    NodeId sat = 0;
    int dst_gw = 0;
    Action action = Action::intra_forward;
    double cost = 0.0;              // one-hop cost after reward shaping
    double neighbor_estimate = 0.0; // min over the neighbour's valid Q(dst, .)
    bool terminal = false;
};

// Q <- (1 - alpha) Q + alpha (cost + gamma * neighbour estimate); terminal
// experiences do not bootstrap.
void q_update(QTable& table, const QExperience& exp, double alpha, double gamma);

struct QRoutingParams {
    double alpha = 0.5;
    double gamma = 1.0;
    EpsilonSchedule epsilon;
    RewardSpec reward;

    void validate() const;
};

class QRoutingPolicy final : public RoutingPolicy {
public:
    QRoutingPolicy(int num_satellites, int num_gateways, QRoutingParams params, std::uint64_t seed,
                   std::optional<QTable> initial = std::nullopt);

    std::string name() const override { return "q_routing"; }
    std::optional<NodeId> next_hop(const NetworkView& view, NodeId node, const PacketView& packet) override;
    std::optional<int> on_hop(const NetworkView& view, const HopFeedback& feedback) override;

    const QTable& table() const { return table_; }
    const LearningLog& log() const { return log_; }
    LearningLog& log() { return log_; }
    std::uint64_t decisions() const { return decisions_; }
    double current_epsilon() const { return params_.epsilon.at(decisions_); }

private:
    struct Pending {
        NodeId sat;
        Action action;
    };

    QRoutingParams params_;
    QTable table_;
    Rng explore_rng_;
    std::uint64_t decisions_ = 0;
    std::uint64_t updates_ = 0;
    std::unordered_map<PacketId, Pending> pending_;
    LearningLog log_;
};

// ------------------------------------------------------------------ MA-DRL

inline constexpr int kStateSize = 5 + 4 * kNumActions;
inline constexpr double kDistanceNorm = 10'000e3; // m

// Local observation of a satellite for one packet. Every component lies in [-1, 1].
struct AgentState {
    std::vector<double> features;
    ActionMask valid{};
};

AgentState observe(const NetworkView& view, NodeId sat, NodeId dst, double rate_norm_bps);

struct Experience {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    ActionMask next_valid{};
    bool terminal = false;
};

// Fixed-capacity ring buffer; the oldest experience is overwritten first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Experience exp);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Experience& at(std::size_t i) const { return items_[i]; }
    // Uniform, without replacement within one batch. Requires n <= size().
    std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Experience> items_;
};

// Highest value over valid actions, ties to the lowest index.
std::optional<int> greedy_action(std::span<const double> values, const ActionMask& mask);

// y = r + gamma * Q_target(s', argmax_valid Q_online(s')) with double_q, or
// r + gamma * max_valid Q_target(s') without; terminal (or no valid next
// action) => y = r.
double ddqn_target(const MlpModel& online, const MlpModel& target, const Experience& exp, double gamma,
                   bool double_q = true);

enum class MadrlPhase { offline, online };
std::string_view to_string(MadrlPhase phase);
MadrlPhase parse_madrl_phase(std::string_view text);

struct MadrlParams {
    std::vector<int> hidden{64, 64};
    double learning_rate = 1e-3;
    double gamma = 0.99;
    std::size_t batch_size = 32;
    std::size_t replay_capacity = 10'000;
    std::uint64_t target_sync = 500;
    std::uint64_t train_interval = 1; // experiences per gradient step
    bool double_q = true;
    MadrlPhase phase = MadrlPhase::offline;
    EpsilonSchedule epsilon;
    RewardSpec reward;
    std::size_t probe_count = 512;

    void validate() const;
    std::vector<int> layer_sizes() const;
};

struct ModelPair {
    MlpModel online;
    MlpModel target;
};

// Offline: one network pair and replay buffer shared by every satellite.
// Online: each satellite trains its own copy with local experiences only.
class MadrlPolicy final : public RoutingPolicy {
public:
    MadrlPolicy(int num_satellites, double rate_norm_bps, MadrlParams params, std::uint64_t seed,
                std::optional<ModelPair> initial = std::nullopt);

    std::string name() const override { return "madrl"; }
    std::optional<NodeId> next_hop(const NetworkView& view, NodeId node, const PacketView& packet) override;
    std::optional<int> on_hop(const NetworkView& view, const HopFeedback& feedback) override;
    void train_step(int agent) override;

    MadrlPhase phase() const { return params_.phase; }
    const MadrlParams& params() const { return params_; }
    // Offline: the shared pair. Online: the satellite's pair (its initial copy
    // when it never trained).
    const ModelPair& models(NodeId sat = 0) const;
    const ModelPair& initial_models() const { return initial_; }
    bool started_from_import() const { return imported_; }
    int num_satellites() const { return num_satellites_; }
    const LearningLog& log() const { return log_; }
    LearningLog& log() { return log_; }
    std::uint64_t decisions() const { return decisions_; }
    std::uint64_t train_steps(int agent = 0) const;
    double current_epsilon() const { return params_.epsilon.at(decisions_); }
    const std::vector<std::vector<double>>& probe_states() const { return probes_; }
    std::uint64_t masked_selections() const { return masked_selections_; }

private:
    struct Agent {
        ModelPair nets;
        ReplayBuffer buffer;
        std::uint64_t experiences = 0;
        std::uint64_t steps = 0;
        Rng replay_rng;
    };
    struct Pending {
        int agent;
        std::vector<double> state;
        int action;
    };

    int agent_id(NodeId sat) const { return params_.phase == MadrlPhase::offline ? 0 : sat; }
    Agent& agent(int id);
    void remember_probe(const std::vector<double>& state);

    int num_satellites_;
    double rate_norm_;
    MadrlParams params_;
    std::uint64_t seed_;
    ModelPair initial_;
    bool imported_ = false;
    std::vector<std::unique_ptr<Agent>> agents_;
    Rng explore_rng_;
    Rng probe_rng_;
    std::uint64_t decisions_ = 0;
    std::uint64_t experiences_ = 0;
    std::uint64_t probes_seen_ = 0;
    std::uint64_t masked_selections_ = 0;
    std::unordered_map<PacketId, Pending> pending_;
    std::vector<std::vector<double>> probes_;
    LearningLog log_;
};

// Probe states file: one state per row, columns f0..f{d-1}.
void save_probe_states(const std::vector<std::vector<double>>& probes, const std::filesystem::path& path);
std::vector<std::vector<double>> load_probe_states(const std::filesystem::path& path);

} // namespace leosim
