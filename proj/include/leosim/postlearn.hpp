#pragma once

#include "leosim/mlp.hpp"
#include "leosim/topology.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string_view>
#include <vector>

namespace leosim {

// Rows: probe states. Columns: hidden features.
using ActivationMatrix = Eigen::MatrixXd;

// Linear CKA. Columns are centred internally, so callers may pass raw
// activations. Returns 0 when either self-similarity term vanishes; the result
// is clamped to [0, 1]. Throws SimulationFault on a row-count mismatch.
double linear_cka(const ActivationMatrix& x, const ActivationMatrix& y);

// Last-hidden-layer activations for each probe state. Needs at least 2 probes.
ActivationMatrix probe_activations(const MlpModel& model, const std::vector<std::vector<double>>& probes);

// Symmetric matrix of pairwise CKA values over the same probe set.
Eigen::MatrixXd cka_matrix(const std::vector<MlpModel>& models, const std::vector<std::vector<double>>& probes);
// Mean of the strictly upper triangle; 1 for fewer than two models.
double mean_pairwise(const Eigen::MatrixXd& matrix);

enum class AggregationTier { model_anticipation, orbital_plane, full_constellation };
std::string_view to_string(AggregationTier tier);
AggregationTier parse_aggregation_tier(std::string_view text);

// Unweighted parameter mean per group. models[i] belongs to satellite node i;
// groups come from the ISL neighbourhood, the orbital plane, or the whole set.
std::vector<MlpModel> aggregate(const std::vector<MlpModel>& models, AggregationTier tier,
                                const TopologySnapshot& topology);

// Mean over parameters of the across-agent (population) variance.
double parameter_variance(const std::vector<MlpModel>& models);

struct TierReport {
    AggregationTier tier;
    double variance_before = 0.0;
    double variance_after = 0.0;
    double mean_cka_before = 0.0;
    double mean_cka_after = 0.0;
};

// Per-agent model files sat_XXXX.mlp in `dir`, ordered by satellite id. A
// satellite without a file is an error.
std::vector<MlpModel> load_agent_models(const std::filesystem::path& dir, int num_satellites);
void save_agent_models(const std::vector<MlpModel>& models, const std::filesystem::path& dir);
std::string agent_model_filename(int sat);

void write_cka_csv(const Eigen::MatrixXd& matrix, const std::filesystem::path& path);

} // namespace leosim
