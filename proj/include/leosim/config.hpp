#pragma once

#include "leosim/channel.hpp"
#include "leosim/orbit.hpp"
#include "leosim/routing_classic.hpp"
#include "leosim/routing_rl.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace leosim {

enum class PolicyKind { shortest_path, q_routing, madrl };
std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view text);

struct GatewayConfig {
    std::filesystem::path file; // empty: bundled list
    int count = 8;
    double min_elevation_deg = 10.0;
};

struct LearningConfig {
    double alpha = 0.5;
    double gamma = 0.99;
    EpsilonSchedule epsilon;
    RewardSpec reward;
    std::size_t batch_size = 32;
    std::size_t replay_capacity = 10'000;
    std::uint64_t target_sync = 500;
    std::uint64_t train_interval = 1;
    bool double_q = true;
    double learning_rate = 1e-3;
    std::vector<int> hidden{64, 64};
    MadrlPhase phase = MadrlPhase::offline;
    std::filesystem::path import_path; // model directory or Q-table CSV; empty: fresh start
    std::size_t probe_count = 512;

    QRoutingParams q_routing() const;
    MadrlParams madrl() const;
};

struct OutputConfig {
    bool packets = true;
    bool queues = true;
    bool routes = true;
    bool charts = true;
    bool trace = false;
    bool save_models = true;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    double duration_s = 60.0;
    std::filesystem::path output_dir = "leosim_out";

    std::string preset = "kepler";
    ConstellationSpec constellation = constellation_preset("kepler");
    GatewayConfig gateways;
    double update_interval_s = 15.0;
    bool frozen_topology = false;
    double load_fraction = 0.5;
    int packet_bits = 64'800;
    int queue_capacity = 100;
    int ttl_hops = 250;
    PolicyKind policy = PolicyKind::shortest_path;
    WeightScheme scheme = WeightScheme::data_rate;
    LearningConfig learning;
    std::filesystem::path modcod_file; // empty: bundled table
    RadioParams isl = default_isl_radio();
    RadioParams gsl_up = default_gsl_up_radio();
    RadioParams gsl_down = default_gsl_down_radio();
    OutputConfig output;

    // Throws ConfigError naming the offending field.
    void validate() const;
    std::filesystem::path gateway_file() const;
    std::filesystem::path modcod_path() const;
};

// Environment overrides: LEOSIM_<SECTION>__<KEY>=value (LEOSIM_<KEY> for
// top-level keys). Values are parsed as JSON when possible, else taken as
// strings.
using EnvMap = std::map<std::string, std::string>;
EnvMap leosim_environment();

// Parses a JSON scenario document. Unknown keys and type errors raise
// ConfigError. Relative paths are resolved against `base_dir`.
ScenarioConfig parse_config(const std::string& text, const EnvMap& env = {},
                            const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path, const EnvMap& env = {});

// The effective configuration, every field present.
nlohmann::json config_to_json(const ScenarioConfig& config);

std::filesystem::path default_data_dir();

} // namespace leosim
