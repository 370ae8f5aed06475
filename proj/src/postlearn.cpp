#include "leosim/postlearn.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace leosim {

namespace {

ActivationMatrix centred(const ActivationMatrix& m) {
    return m.rowwise() - m.colwise().mean();
}

} // namespace

double linear_cka(const ActivationMatrix& x, const ActivationMatrix& y) {
    if (x.rows() != y.rows()) {
        throw SimulationFault("linear_cka: row counts differ (" + std::to_string(x.rows()) + " vs " +
                              std::to_string(y.rows()) + ")");
    }
    const ActivationMatrix xc = centred(x);
    const ActivationMatrix yc = centred(y);
    const double den = (xc.transpose() * xc).norm() * (yc.transpose() * yc).norm();
    if (!(den > 0.0)) {
        return 0.0;
    }
    const double num = (yc.transpose() * xc).squaredNorm();
    return std::clamp(num / den, 0.0, 1.0);
}

ActivationMatrix probe_activations(const MlpModel& model, const std::vector<std::vector<double>>& probes) {
    if (probes.size() < 2) {
        throw ConfigError("probes", "at least 2 probe states are required");
    }
    ActivationMatrix m;
    for (std::size_t r = 0; r < probes.size(); ++r) {
        const std::vector<double> h = model.last_hidden(probes[r]);
        if (r == 0) {
            m.resize(static_cast<Eigen::Index>(probes.size()), static_cast<Eigen::Index>(h.size()));
        }
        for (std::size_t c = 0; c < h.size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = h[c];
        }
    }
    return m;
}

Eigen::MatrixXd cka_matrix(const std::vector<MlpModel>& models, const std::vector<std::vector<double>>& probes) {
    std::vector<ActivationMatrix> acts;
    acts.reserve(models.size());
    for (const MlpModel& m : models) {
        acts.push_back(probe_activations(m, probes));
    }
    const auto n = static_cast<Eigen::Index>(models.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = linear_cka(acts[static_cast<std::size_t>(i)], acts[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = linear_cka(acts[static_cast<std::size_t>(i)], acts[static_cast<std::size_t>(j)]);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

double mean_pairwise(const Eigen::MatrixXd& matrix) {
    const Eigen::Index n = matrix.rows();
    if (n < 2) {
        return 1.0;
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            sum += matrix(i, j);
        }
    }
    return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

std::string_view to_string(AggregationTier tier) {
    switch (tier) {
    case AggregationTier::model_anticipation:
        return "model_anticipation";
    case AggregationTier::orbital_plane:
        return "orbital_plane";
    case AggregationTier::full_constellation:
        return "full_constellation";
    }
    return "?";
}

AggregationTier parse_aggregation_tier(std::string_view text) {
    for (auto t : {AggregationTier::model_anticipation, AggregationTier::orbital_plane,
                   AggregationTier::full_constellation}) {
        if (text == to_string(t)) {
            return t;
        }
    }
    throw ConfigError("tier", "expected model_anticipation, orbital_plane or full_constellation, got '" +
                                  std::string(text) + "'");
}

std::vector<MlpModel> aggregate(const std::vector<MlpModel>& models, AggregationTier tier,
                                const TopologySnapshot& topology) {
    if (models.empty()) {
        return {};
    }
    for (const MlpModel& m : models) {
        if (!m.same_architecture(models.front())) {
            throw SimulationFault("aggregate: models differ in architecture");
        }
    }
    const int n = static_cast<int>(models.size());
    if (tier != AggregationTier::full_constellation && n != topology.num_satellites()) {
        throw SimulationFault("aggregate: expected one model per satellite");
    }

    auto mean_of = [&](const std::vector<int>& group) {
        MlpModel out(models.front().layer_sizes());
        auto acc = out.parameters();
        for (int g : group) {
            const auto p = models[static_cast<std::size_t>(g)].parameters();
            for (std::size_t i = 0; i < acc.size(); ++i) {
                acc[i] += p[i];
            }
        }
        const double inv = 1.0 / static_cast<double>(group.size());
        for (double& v : acc) {
            v *= inv;
        }
        return out;
    };

    std::vector<MlpModel> out;
    out.reserve(models.size());
    switch (tier) {
    case AggregationTier::model_anticipation:
        for (int s = 0; s < n; ++s) {
            std::set<int> group{s};
            for (int e : topology.incident(s)) {
                const Edge& edge = topology.edges()[static_cast<std::size_t>(e)];
                if (edge.kind != LinkKind::gsl) {
                    group.insert(edge.other(s));
                }
            }
            out.push_back(mean_of({group.begin(), group.end()}));
        }
        break;
    case AggregationTier::orbital_plane: {
        const int per_plane = std::max(1, topology.layout().sats_per_plane);
        const int planes = (n + per_plane - 1) / per_plane;
        std::vector<MlpModel> plane_means;
        for (int p = 0; p < planes; ++p) {
            std::vector<int> group;
            for (int s = p * per_plane; s < std::min(n, (p + 1) * per_plane); ++s) {
                group.push_back(s);
            }
            plane_means.push_back(mean_of(group));
        }
        for (int s = 0; s < n; ++s) {
            out.push_back(plane_means[static_cast<std::size_t>(s / per_plane)]);
        }
        break;
    }
    case AggregationTier::full_constellation: {
        std::vector<int> all(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) {
            all[static_cast<std::size_t>(s)] = s;
        }
        out.assign(static_cast<std::size_t>(n), mean_of(all));
        break;
    }
    }
    return out;
}

double parameter_variance(const std::vector<MlpModel>& models) {
    if (models.size() < 2) {
        return 0.0;
    }
    const std::size_t p = models.front().num_parameters();
    if (p == 0) {
        return 0.0;
    }
    const double n = static_cast<double>(models.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        // Deviations from the first agent: identical agents give exactly 0.
        const double ref = models.front().parameters()[i];
        double mean = 0.0;
        for (const MlpModel& m : models) {
            mean += m.parameters()[i] - ref;
        }
        mean /= n;
        double var = 0.0;
        for (const MlpModel& m : models) {
            const double d = m.parameters()[i] - ref - mean;
            var += d * d;
        }
        total += var / n;
    }
    return total / static_cast<double>(p);
}

std::string agent_model_filename(int sat) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sat_%04d.mlp", sat);
    return buf;
}

std::vector<MlpModel> load_agent_models(const std::filesystem::path& dir, int num_satellites) {
    std::vector<MlpModel> models;
    models.reserve(static_cast<std::size_t>(num_satellites));
    for (int s = 0; s < num_satellites; ++s) {
        models.push_back(load_model(dir / agent_model_filename(s)));
    }
    return models;
}

void save_agent_models(const std::vector<MlpModel>& models, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t s = 0; s < models.size(); ++s) {
        save_model(models[s], dir / agent_model_filename(static_cast<int>(s)));
    }
}

void write_cka_csv(const Eigen::MatrixXd& matrix, const std::filesystem::path& path) {
    std::string out = "agent_i,agent_j,cka\n";
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            out += std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(matrix(i, j)) + '\n';
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write " + path.string());
    }
    f << out;
}

} // namespace leosim
