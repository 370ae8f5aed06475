// leosim command line: run scenarios, render charts, compare runs and
// post-process learned models.

#include "leosim/charts.hpp"
#include "leosim/config.hpp"
#include "leosim/csv.hpp"
#include "leosim/errors.hpp"
#include "leosim/postlearn.hpp"
#include "leosim/run.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace leosim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFault = 3;

// "traffic.load_fraction=0.1" -> LEOSIM_TRAFFIC__LOAD_FRACTION
std::pair<std::string, std::string> override_entry(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
    }
    std::string key = "LEOSIM_";
    for (char c : assignment.substr(0, eq)) {
        if (c == '.') {
            key += "__";
        } else {
            key += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
    }
    return {key, assignment.substr(eq + 1)};
}

ScenarioConfig config_of_run(const fs::path& run) {
    const auto manifest = nlohmann::json::parse(read_text_file(run / "manifest.json"));
    return parse_config(manifest.at("config").dump());
}

TopologySnapshot initial_topology(const ScenarioConfig& c) {
    TopologyParams params;
    params.min_elevation_rad = deg_to_rad(c.gateways.min_elevation_deg);
    ConstellationTopology topo(c.constellation, load_active_gateways(c), params, make_link_budget(c));
    return topo.snapshot_at(0.0);
}

void print_summary(const RunSummary& s) {
    std::printf("output      %s\n", s.output_dir.string().c_str());
    std::printf("created     %llu\n", static_cast<unsigned long long>(s.counts.created));
    std::printf("delivered   %llu\n", static_cast<unsigned long long>(s.counts.delivered));
    std::printf("dropped     %llu\n", static_cast<unsigned long long>(s.counts.dropped));
    std::printf("stuck       %llu\n", static_cast<unsigned long long>(s.counts.stuck));
    std::printf("in_flight   %llu\n", static_cast<unsigned long long>(s.counts.in_flight));
    std::printf("mean_e2e_s  %.9f\n", s.latency.mean_e2e_s());
    std::printf("rebuilds    %d\n", s.rebuilds);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"leosim: packet-level LEO constellation routing simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // run
    auto* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    std::optional<double> load;
    std::string output;
    std::string preset;
    std::string policy;
    std::string scheme;
    std::string phase;
    std::string import_path;
    std::optional<int> gateways;
    run->add_option("-c,--config", config_path, "Scenario JSON file (omit for defaults)");
    run->add_option("--set", sets, "Override any key, e.g. --set traffic.load_fraction=0.1");
    run->add_option("--seed", seed, "seed");
    run->add_option("--duration", duration, "duration_s");
    run->add_option("-o,--output", output, "output_dir");
    run->add_option("--preset", preset, "constellation.preset");
    run->add_option("--gateways", gateways, "gateways.count");
    run->add_option("--load", load, "traffic.load_fraction");
    run->add_option("--policy", policy, "routing.policy");
    run->add_option("--scheme", scheme, "routing.scheme");
    run->add_option("--phase", phase, "learning.phase");
    run->add_option("--import", import_path, "learning.import_path");
    bool print_config = false;
    run->add_flag("--print-config", print_config, "Print the effective config and exit");

    // charts
    auto* charts = app.add_subcommand("charts", "Render SVG charts from a run directory");
    std::string chart_run;
    std::string chart_out;
    charts->add_option("run_dir", chart_run, "Run directory")->required();
    charts->add_option("-o,--output", chart_out, "Chart directory (default <run_dir>/charts)");

    // compare
    auto* compare = app.add_subcommand("compare", "Compare latency over time across runs");
    std::vector<std::string> compare_dirs;
    std::string compare_out = "compare_out";
    double bin_s = 60.0;
    compare->add_option("runs", compare_dirs, "Run directories")->required()->expected(2, -1);
    compare->add_option("-o,--output", compare_out, "Output directory");
    compare->add_option("--bin", bin_s, "Time bin width in seconds");

    // aggregate
    auto* aggregate_cmd = app.add_subcommand("aggregate", "Average per-agent models by tier");
    std::string agg_run;
    std::string agg_out;
    std::string tier_name = "full_constellation";
    aggregate_cmd->add_option("run_dir", agg_run, "Online-phase run directory with agents/")->required();
    aggregate_cmd->add_option("--tier", tier_name, "model_anticipation | orbital_plane | full_constellation");
    aggregate_cmd->add_option("-o,--output", agg_out, "Output directory (default <run_dir>/aggregated_<tier>)");

    // cka
    auto* cka = app.add_subcommand("cka", "Pairwise CKA between per-agent models");
    std::string cka_models;
    std::string cka_probes;
    std::string cka_out;
    cka->add_option("models_dir", cka_models, "Directory with sat_XXXX.mlp files")->required();
    cka->add_option("--probes", cka_probes, "Probe states CSV")->required();
    cka->add_option("-o,--output", cka_out, "Output CSV (default <models_dir>/cka_matrix.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) {
            EnvMap env = leosim_environment();
            for (const std::string& s : sets) {
                auto [key, value] = override_entry(s);
                env[key] = value;
            }
            auto put = [&](const std::string& key, const std::string& value) { env[override_entry(key + "=").first] = value; };
            if (seed) put("seed", std::to_string(*seed));
            if (duration) put("duration_s", format_double(*duration));
            if (!output.empty()) put("output_dir", nlohmann::json(output).dump());
            if (!preset.empty()) put("constellation.preset", nlohmann::json(preset).dump());
            if (gateways) put("gateways.count", std::to_string(*gateways));
            if (load) put("traffic.load_fraction", format_double(*load));
            if (!policy.empty()) put("routing.policy", nlohmann::json(policy).dump());
            if (!scheme.empty()) put("routing.scheme", nlohmann::json(scheme).dump());
            if (!phase.empty()) put("learning.phase", nlohmann::json(phase).dump());
            if (!import_path.empty()) put("learning.import_path", nlohmann::json(import_path).dump());

            const ScenarioConfig config = config_path.empty() ? parse_config("", env) : load_config(config_path, env);
            if (print_config) {
                std::cout << config_to_json(config).dump(2) << '\n';
                return 0;
            }
            print_summary(run_scenario(config));
        } else if (*charts) {
            const fs::path out = chart_out.empty() ? fs::path(chart_run) / "charts" : fs::path(chart_out);
            const ChartReport report = render_charts(chart_run, out);
            for (const std::string& f : report.written) {
                std::printf("wrote %s\n", (out / f).string().c_str());
            }
            for (const auto& [name, reason] : report.failures) {
                std::fprintf(stderr, "skipped %s: %s\n", name.c_str(), reason.c_str());
            }
        } else if (*compare) {
            std::vector<fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
            const auto bins = compare_runs(dirs, compare_out, bin_s);
            std::printf("wrote %zu bins to %s\n", bins.size(), (fs::path(compare_out) / "compare.csv").string().c_str());
        } else if (*aggregate_cmd) {
            const AggregationTier tier = parse_aggregation_tier(tier_name);
            const ScenarioConfig config = config_of_run(agg_run);
            const TopologySnapshot topo = initial_topology(config);
            const auto models = load_agent_models(fs::path(agg_run) / "agents", topo.num_satellites());
            const auto probes = load_probe_states(fs::path(agg_run) / "probes.csv");
            const auto merged = aggregate(models, tier, topo);
            const fs::path out = agg_out.empty() ? fs::path(agg_run) / ("aggregated_" + tier_name) : fs::path(agg_out);
            save_agent_models(merged, out);
            TierReport r{tier, parameter_variance(models), parameter_variance(merged),
                         mean_pairwise(cka_matrix(models, probes)), mean_pairwise(cka_matrix(merged, probes))};
            std::string report = "tier,variance_before,variance_after,mean_cka_before,mean_cka_after\n";
            report += std::string(to_string(r.tier)) + ',' + format_double(r.variance_before) + ',' +
                      format_double(r.variance_after) + ',' + format_double(r.mean_cka_before) + ',' +
                      format_double(r.mean_cka_after) + '\n';
            std::ofstream(out / "aggregation_report.csv", std::ios::binary) << report;
            std::cout << report;
        } else if (*cka) {
            const auto probes = load_probe_states(cka_probes);
            std::vector<MlpModel> models;
            for (int s = 0; fs::exists(fs::path(cka_models) / agent_model_filename(s)); ++s) {
                models.push_back(load_model(fs::path(cka_models) / agent_model_filename(s)));
            }
            if (models.size() < 2) {
                throw ConfigError("models_dir", "need at least two sat_XXXX.mlp files");
            }
            const Eigen::MatrixXd m = cka_matrix(models, probes);
            const fs::path out = cka_out.empty() ? fs::path(cka_models) / "cka_matrix.csv" : fs::path(cka_out);
            write_cka_csv(m, out);
            std::printf("agents %zu mean_pairwise_cka %.12f\nwrote %s\n", models.size(), mean_pairwise(m),
                        out.string().c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const LoadError& e) {
        std::fprintf(stderr, "load error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime fault: %s\n", e.what());
        return kExitFault;
    }
    return 0;
}
