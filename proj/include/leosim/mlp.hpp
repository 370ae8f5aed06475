#pragma once

#include "leosim/rng.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace leosim {

// Fully connected network: rectifier on hidden layers, identity on the output.
// Parameters live in one flat vector, layer by layer: weights (row-major,
// out x in) followed by biases.
class MlpModel {
public:
    MlpModel() = default;
    // All parameters zero.
    explicit MlpModel(std::vector<int> layer_sizes);
    // He-uniform weights, zero biases.
    static MlpModel random(std::vector<int> layer_sizes, Rng& rng);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
    bool same_architecture(const MlpModel& other) const { return sizes_ == other.sizes_; }

    std::size_t num_parameters() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    double& weight(int layer, int out, int in);
    double weight(int layer, int out, int in) const;
    double& bias(int layer, int out);
    double bias(int layer, int out) const;
    // Contiguous input weights of one output unit.
    const double* weight_row(int layer, int out) const {
        return params_.data() + weight_offset(layer) +
               static_cast<std::size_t>(out) * static_cast<std::size_t>(sizes_[static_cast<std::size_t>(layer)]);
    }

    // Throws SimulationFault on a dimension mismatch.
    std::vector<double> forward(std::span<const double> input) const;
    // Activations of the last hidden layer (input itself for a model without
    // hidden layers).
    std::vector<double> last_hidden(std::span<const double> input) const;
    // Sign pattern of every hidden pre-activation (true = active).
    std::vector<bool> activation_pattern(std::span<const double> input) const;

private:
    std::size_t weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
    std::size_t bias_offset(int layer) const {
        return offsets_[static_cast<std::size_t>(layer)] +
               static_cast<std::size_t>(sizes_[static_cast<std::size_t>(layer)]) *
                   static_cast<std::size_t>(sizes_[static_cast<std::size_t>(layer) + 1]);
    }
    void check_input(std::span<const double> input) const;

    std::vector<int> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

// A minibatch for the taken-action regression: loss = mean_i (Q(s_i)[a_i] - y_i)^2.
struct QBatch {
    std::vector<std::vector<double>> states;
    std::vector<int> actions;
    std::vector<double> targets;

    std::size_t size() const { return states.size(); }
};

double mse_loss(const MlpModel& model, const QBatch& batch);
// Reverse-mode gradient of mse_loss, laid out like MlpModel::parameters().
// Throws SimulationFault when the loss is not finite.
std::vector<double> mlp_backward(const MlpModel& model, const QBatch& batch, double* loss = nullptr);
void sgd_step(MlpModel& model, std::span<const double> gradient, double learning_rate);

// Text format with a versioned header; parameters written as hex floats so a
// load reproduces them bit for bit.
std::string serialize_model(const MlpModel& model);
MlpModel parse_model(const std::string& text, const std::string& source = "<memory>");
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

} // namespace leosim
