#include "leosim/errors.hpp"
#include "leosim/postlearn.hpp"
#include "leosim/routing_rl.hpp"

#include "support/small_grid.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace leosim;
using namespace leosim::testing;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            m(r, c) = rng.normal();
        }
    }
    return m;
}

std::vector<MlpModel> random_models(int n, std::vector<int> sizes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<MlpModel> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(MlpModel::random(sizes, rng));
    }
    return out;
}

std::vector<std::vector<double>> random_probes(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> p(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    for (auto& row : p) {
        for (double& v : row) {
            v = rng.uniform(-1.0, 1.0);
        }
    }
    return p;
}

bool same_parameters(const MlpModel& a, const MlpModel& b) {
    return std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin(), b.parameters().end());
}

} // namespace

TEST_CASE("linear CKA invariances") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd x = random_matrix(rng, 40, 12);
        const Eigen::MatrixXd y = random_matrix(rng, 40, 7);
        CHECK(linear_cka(x, x) == doctest::Approx(1.0).epsilon(1e-10));

        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, 12, 12)).householderQ();
        CHECK(std::abs(linear_cka(x, x * q) - 1.0) < 1e-10);
        CHECK(std::abs(linear_cka(x, -3.5 * x) - 1.0) < 1e-10);
        CHECK(std::abs(linear_cka(x, y) - linear_cka(x * q, y)) < 1e-10);
        CHECK(std::abs(linear_cka(x, y) - linear_cka(y, x)) < 1e-12);

        // Column offsets do not matter: centring is internal.
        Eigen::MatrixXd shifted = x;
        shifted.rowwise() += Eigen::RowVectorXd::Constant(12, 5.0);
        CHECK(std::abs(linear_cka(shifted, y) - linear_cka(x, y)) < 1e-10);

        const double c = linear_cka(x, y);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        CHECK(c < 0.9);
    }
    const Eigen::MatrixXd x = random_matrix(rng, 10, 3);
    CHECK(linear_cka(x, Eigen::MatrixXd::Zero(10, 4)) == 0.0);
    CHECK(linear_cka(Eigen::MatrixXd::Constant(10, 3, 2.0), x) == 0.0);
    CHECK_THROWS_AS(linear_cka(x, random_matrix(rng, 9, 3)), SimulationFault);
}

TEST_CASE("CKA of models over probe states") {
    const auto models = random_models(3, {25, 16, 16, 5}, 2);
    const auto probes = random_probes(64, 25, 3);
    const ActivationMatrix a = probe_activations(models[0], probes);
    CHECK(a.rows() == 64);
    CHECK(a.cols() == 16);
    CHECK_THROWS_AS(probe_activations(models[0], random_probes(1, 25, 3)), ConfigError);

    const Eigen::MatrixXd m = cka_matrix({models[0], models[0], models[1], models[2]}, probes);
    CHECK(m(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m(0, 2) < 1.0);
    CHECK(m(2, 3) == m(3, 2));
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(m(i, i) == 1.0);
    }
    const double mean = (m(0, 1) + m(0, 2) + m(0, 3) + m(1, 2) + m(1, 3) + m(2, 3)) / 6.0;
    CHECK(mean_pairwise(m) == doctest::Approx(mean));
    CHECK(mean_pairwise(Eigen::MatrixXd::Identity(1, 1)) == 1.0);

    const auto dir = std::filesystem::temp_directory_path() / "leosim_test_cka";
    std::filesystem::create_directories(dir);
    write_cka_csv(m, dir / "cka_matrix.csv");
    std::ifstream in(dir / "cka_matrix.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "agent_i,agent_j,cka");
    std::filesystem::remove_all(dir);
}

TEST_CASE("tier parsing") {
    CHECK(parse_aggregation_tier("orbital_plane") == AggregationTier::orbital_plane);
    CHECK(parse_aggregation_tier("full_constellation") == AggregationTier::full_constellation);
    CHECK(to_string(AggregationTier::model_anticipation) == "model_anticipation");
    CHECK_THROWS_AS(parse_aggregation_tier("ring"), ConfigError);
}

TEST_CASE("aggregation tiers on the 2 x 4 grid") {
    const TopologySnapshot g = small_grid();
    const auto models = random_models(8, {25, 8, 5}, 6);
    const auto probes = random_probes(32, 25, 1);

    SUBCASE("model anticipation averages self and ISL neighbours") {
        const auto out = aggregate(models, AggregationTier::model_anticipation, g);
        // Satellite 0: intra neighbours 1, 3 and inter neighbour 4; the GSL
        // does not count.
        for (std::size_t i = 0; i < models[0].num_parameters(); ++i) {
            const double mean = (models[0].parameters()[i] + models[1].parameters()[i] + models[3].parameters()[i] +
                                 models[4].parameters()[i]) / 4.0;
            CHECK(out[0].parameters()[i] == doctest::Approx(mean).epsilon(1e-14));
        }
        CHECK(parameter_variance(out) <= parameter_variance(models));
    }
    SUBCASE("orbital plane makes each plane uniform") {
        const auto out = aggregate(models, AggregationTier::orbital_plane, g);
        for (int k = 1; k < 4; ++k) {
            CHECK(same_parameters(out[0], out[static_cast<std::size_t>(k)]));
            CHECK(same_parameters(out[4], out[static_cast<std::size_t>(4 + k)]));
        }
        CHECK_FALSE(same_parameters(out[0], out[4]));
        const Eigen::MatrixXd m = cka_matrix({out[0], out[1], out[2], out[3]}, probes);
        CHECK(mean_pairwise(m) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(parameter_variance(out) <= parameter_variance(models));
    }
    SUBCASE("full constellation makes everyone identical") {
        const auto out = aggregate(models, AggregationTier::full_constellation, g);
        for (const auto& m : out) {
            CHECK(same_parameters(m, out[0]));
        }
        CHECK(parameter_variance(out) == 0.0);
        CHECK(mean_pairwise(cka_matrix(out, probes)) == doctest::Approx(1.0).epsilon(1e-12));
        // Full after plane: still everyone identical.
        const auto nested =
            aggregate(aggregate(models, AggregationTier::orbital_plane, g), AggregationTier::full_constellation, g);
        for (const auto& m : nested) {
            CHECK(same_parameters(m, nested[0]));
        }
    }
    SUBCASE("identical models are a fixed point") {
        const std::vector<MlpModel> same(8, models[2]);
        for (auto tier : {AggregationTier::model_anticipation, AggregationTier::orbital_plane,
                          AggregationTier::full_constellation}) {
            for (const auto& m : aggregate(same, tier, g)) {
                for (std::size_t i = 0; i < m.num_parameters(); ++i) {
                    CHECK(m.parameters()[i] == doctest::Approx(models[2].parameters()[i]).epsilon(1e-15));
                }
            }
        }
    }
}

TEST_CASE("theta and minus theta average to the zero model") {
    const auto m = random_models(1, {4, 3, 2}, 8)[0];
    MlpModel neg = m;
    for (double& v : neg.parameters()) {
        v = -v;
    }
    const TopologySnapshot g(0.0, 2, 0, {}, {}, {});
    for (const auto& out : aggregate({m, neg}, AggregationTier::full_constellation, g)) {
        for (double v : out.parameters()) {
            CHECK(v == 0.0);
        }
    }
}

TEST_CASE("aggregation rejects mismatched inputs") {
    const TopologySnapshot g = small_grid();
    auto models = random_models(8, {25, 8, 5}, 6);
    models[3] = MlpModel({25, 9, 5});
    CHECK_THROWS_AS(aggregate(models, AggregationTier::full_constellation, g), SimulationFault);
    CHECK_THROWS(aggregate(random_models(5, {25, 8, 5}, 1), AggregationTier::orbital_plane, g));
}

TEST_CASE("variance is the mean per-parameter population variance") {
    MlpModel a({1, 1});
    MlpModel b({1, 1});
    a.weight(0, 0, 0) = 1.0;
    b.weight(0, 0, 0) = 3.0;
    a.bias(0, 0) = 2.0;
    b.bias(0, 0) = 2.0;
    // weight variance 1, bias variance 0
    CHECK(parameter_variance({a, b}) == 0.5);
    CHECK(parameter_variance({a}) == 0.0);
}

TEST_CASE("agent model directory round trip") {
    const auto models = random_models(3, {25, 4, 5}, 12);
    const auto dir = std::filesystem::temp_directory_path() / "leosim_test_agents";
    std::filesystem::remove_all(dir);
    save_agent_models(models, dir);
    CHECK(agent_model_filename(7) == "sat_0007.mlp");
    CHECK(std::filesystem::exists(dir / "sat_0002.mlp"));
    const auto back = load_agent_models(dir, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(same_parameters(back[i], models[i]));
    }
    CHECK_THROWS(load_agent_models(dir, 4));
    std::filesystem::remove_all(dir);
}

TEST_CASE("online agents trained on different traffic are not identical") {
    MadrlParams p;
    p.hidden = {16, 16};
    p.batch_size = 8;
    p.learning_rate = 0.02;
    p.phase = MadrlPhase::online;
    p.epsilon = {1.0, 0.2, 3000};
    MadrlPolicy online(8, kGridIslRate, p, 21);
    run_on_grid(online, 0.3, 2.0, 21);
    std::vector<MlpModel> trained;
    for (int s = 0; s < 8; ++s) {
        if (online.train_steps(s) > 0) {
            trained.push_back(online.models(s).online);
        }
    }
    REQUIRE(trained.size() >= 2);
    REQUIRE(online.probe_states().size() >= 2);
    const Eigen::MatrixXd m = cka_matrix(trained, online.probe_states());
    CHECK(mean_pairwise(m) < 1.0);
}
