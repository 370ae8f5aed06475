#include "leosim/mlp.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace leosim {

MlpModel::MlpModel(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) {
        throw ConfigError("layers", "a model needs an input and an output layer");
    }
    for (int s : sizes_) {
        if (s < 1) {
            throw ConfigError("layers", "layer sizes must be >= 1");
        }
    }
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(total);
        total += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]) +
                 static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_.assign(total, 0.0);
}

MlpModel MlpModel::random(std::vector<int> layer_sizes, Rng& rng) {
    MlpModel m(std::move(layer_sizes));
    for (int l = 0; l < m.num_layers(); ++l) {
        const int in = m.sizes_[static_cast<std::size_t>(l)];
        const int out = m.sizes_[static_cast<std::size_t>(l) + 1];
        const double limit = std::sqrt(6.0 / in);
        for (int o = 0; o < out; ++o) {
            for (int i = 0; i < in; ++i) {
                m.weight(l, o, i) = rng.uniform(-limit, limit);
            }
        }
    }
    return m;
}

double& MlpModel::weight(int layer, int out, int in) {
    return params_[weight_offset(layer) +
                   static_cast<std::size_t>(out) * static_cast<std::size_t>(sizes_[static_cast<std::size_t>(layer)]) +
                   static_cast<std::size_t>(in)];
}

double MlpModel::weight(int layer, int out, int in) const {
    return const_cast<MlpModel*>(this)->weight(layer, out, in);
}

double& MlpModel::bias(int layer, int out) {
    return params_[bias_offset(layer) + static_cast<std::size_t>(out)];
}

double MlpModel::bias(int layer, int out) const {
    return const_cast<MlpModel*>(this)->bias(layer, out);
}

void MlpModel::check_input(std::span<const double> input) const {
    if (sizes_.empty() || static_cast<int>(input.size()) != input_size()) {
        throw SimulationFault("model input has " + std::to_string(input.size()) + " features, expected " +
                              std::to_string(sizes_.empty() ? 0 : input_size()));
    }
}

namespace {

// z = W a + b for one layer.
void affine(const MlpModel& m, int layer, std::span<const double> a, std::vector<double>& z) {
    const int out = m.layer_sizes()[static_cast<std::size_t>(layer) + 1];
    const int in = m.layer_sizes()[static_cast<std::size_t>(layer)];
    z.assign(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
        double acc = m.bias(layer, o);
        const double* w = m.weight_row(layer, o);
        for (int i = 0; i < in; ++i) {
            acc += w[i] * a[static_cast<std::size_t>(i)];
        }
        z[static_cast<std::size_t>(o)] = acc;
    }
}

// Activations per layer (index 0 = input), last entry = output.
std::vector<std::vector<double>> forward_all(const MlpModel& m, std::span<const double> input) {
    std::vector<std::vector<double>> acts;
    acts.reserve(static_cast<std::size_t>(m.num_layers()) + 1);
    acts.emplace_back(input.begin(), input.end());
    for (int l = 0; l < m.num_layers(); ++l) {
        std::vector<double> z;
        affine(m, l, acts.back(), z);
        if (l + 1 < m.num_layers()) {
            for (double& v : z) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

} // namespace

std::vector<double> MlpModel::forward(std::span<const double> input) const {
    check_input(input);
    return forward_all(*this, input).back();
}

std::vector<double> MlpModel::last_hidden(std::span<const double> input) const {
    check_input(input);
    auto acts = forward_all(*this, input);
    return acts[acts.size() - 2];
}

std::vector<bool> MlpModel::activation_pattern(std::span<const double> input) const {
    check_input(input);
    std::vector<bool> pattern;
    std::vector<double> a(input.begin(), input.end());
    for (int l = 0; l + 1 < num_layers(); ++l) {
        std::vector<double> z;
        affine(*this, l, a, z);
        for (double& v : z) {
            pattern.push_back(v > 0.0);
            v = v > 0.0 ? v : 0.0;
        }
        a = std::move(z);
    }
    return pattern;
}

double mse_loss(const MlpModel& model, const QBatch& batch) {
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto q = model.forward(batch.states[i]);
        const double diff = q[static_cast<std::size_t>(batch.actions[i])] - batch.targets[i];
        loss += diff * diff;
    }
    return loss / static_cast<double>(batch.size());
}

std::vector<double> mlp_backward(const MlpModel& model, const QBatch& batch, double* loss_out) {
    if (batch.size() == 0 || batch.actions.size() != batch.size() || batch.targets.size() != batch.size()) {
        throw SimulationFault("training batch is empty or inconsistent");
    }
    std::vector<double> grad(model.num_parameters(), 0.0);
    const auto& sizes = model.layer_sizes();
    const double scale = 2.0 / static_cast<double>(batch.size());
    double loss = 0.0;

    // Offsets mirror MlpModel's flat layout.
    std::vector<std::size_t> w_off;
    std::size_t off = 0;
    for (int l = 0; l < model.num_layers(); ++l) {
        w_off.push_back(off);
        off += static_cast<std::size_t>(sizes[static_cast<std::size_t>(l)]) *
                   static_cast<std::size_t>(sizes[static_cast<std::size_t>(l) + 1]) +
               static_cast<std::size_t>(sizes[static_cast<std::size_t>(l) + 1]);
    }

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto acts = forward_all(model, batch.states[s]);
        const int action = batch.actions[s];
        if (action < 0 || action >= model.output_size()) {
            throw SimulationFault("action index out of range in training batch");
        }
        const double diff = acts.back()[static_cast<std::size_t>(action)] - batch.targets[s];
        loss += diff * diff;

        std::vector<double> delta(static_cast<std::size_t>(model.output_size()), 0.0);
        delta[static_cast<std::size_t>(action)] = scale * diff;
        for (int l = model.num_layers() - 1; l >= 0; --l) {
            const int in = sizes[static_cast<std::size_t>(l)];
            const int out = sizes[static_cast<std::size_t>(l) + 1];
            const auto& a_in = acts[static_cast<std::size_t>(l)];
            double* gw = grad.data() + w_off[static_cast<std::size_t>(l)];
            double* gb = gw + static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
            std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                if (d == 0.0) {
                    continue;
                }
                gb[o] += d;
                const double* w = model.weight_row(l, o);
                double* gwr = gw + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
                for (int i = 0; i < in; ++i) {
                    gwr[i] += d * a_in[static_cast<std::size_t>(i)];
                    prev[static_cast<std::size_t>(i)] += d * w[i];
                }
            }
            if (l > 0) {
                // Rectifier derivative of the layer below.
                for (int i = 0; i < in; ++i) {
                    if (!(a_in[static_cast<std::size_t>(i)] > 0.0)) {
                        prev[static_cast<std::size_t>(i)] = 0.0;
                    }
                }
            }
            delta = std::move(prev);
        }
    }
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss (" << loss << ") over a batch of " << batch.size() << "; first target "
            << batch.targets.front() << ", first action " << batch.actions.front();
        throw SimulationFault(msg.str());
    }
    if (loss_out) {
        *loss_out = loss;
    }
    return grad;
}

void sgd_step(MlpModel& model, std::span<const double> gradient, double learning_rate) {
    auto params = model.parameters();
    if (gradient.size() != params.size()) {
        throw SimulationFault("gradient size does not match the model");
    }
    if (learning_rate == 0.0) {
        return;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= learning_rate * gradient[i];
    }
}

std::string serialize_model(const MlpModel& model) {
    std::string out = "leosim-mlp 1\nlayers";
    for (int s : model.layer_sizes()) {
        out += ' ' + std::to_string(s);
    }
    out += "\nactivation relu identity\nparameters " + std::to_string(model.num_parameters()) + '\n';
    char buf[64];
    for (double v : model.parameters()) {
        std::snprintf(buf, sizeof buf, "%a\n", v);
        out += buf;
    }
    out += "end\n";
    return out;
}

MlpModel parse_model(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) {
            throw LoadError(source + ": truncated model file (missing " + what + ")");
        }
        return std::string(trim(line));
    };
    if (next_line("header") != "leosim-mlp 1") {
        throw LoadError(source + ": not a leosim-mlp v1 model file");
    }
    std::istringstream layers(next_line("layers"));
    std::string tag;
    layers >> tag;
    if (tag != "layers") {
        throw LoadError(source + ": expected 'layers' line");
    }
    std::vector<int> sizes;
    int s = 0;
    while (layers >> s) {
        sizes.push_back(s);
    }
    if (sizes.size() < 2 || std::any_of(sizes.begin(), sizes.end(), [](int v) { return v < 1; })) {
        throw LoadError(source + ": invalid layer sizes");
    }
    if (next_line("activation") != "activation relu identity") {
        throw LoadError(source + ": unsupported activation line");
    }
    std::istringstream count_line(next_line("parameter count"));
    std::size_t count = 0;
    count_line >> tag >> count;
    MlpModel model(sizes);
    if (tag != "parameters" || count != model.num_parameters()) {
        throw LoadError(source + ": parameter count does not match the layer sizes");
    }
    auto params = model.parameters();
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) {
            throw LoadError(source + ": truncated model file: read " + std::to_string(i) + " of " +
                            std::to_string(count) + " parameters");
        }
        const std::string v(trim(line));
        char* end = nullptr;
        errno = 0;
        params[i] = std::strtod(v.c_str(), &end);
        if (v.empty() || end != v.c_str() + v.size() || v == "end") {
            throw LoadError(source + ": bad parameter " + std::to_string(i) + ": '" + v + "'");
        }
    }
    if (next_line("end marker") != "end") {
        throw LoadError(source + ": missing end marker");
    }
    return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw LoadError("cannot write " + path.string());
    }
    out << serialize_model(model);
}

MlpModel load_model(const std::filesystem::path& path) {
    return parse_model(read_text_file(path), path.string());
}

} // namespace leosim
