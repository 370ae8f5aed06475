#include "leosim/run.hpp"

#include "leosim/charts.hpp"
#include "leosim/csv.hpp"
#include "leosim/errors.hpp"
#include "leosim/postlearn.hpp"
#include "leosim/routing_classic.hpp"
#include "leosim/routing_rl.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace leosim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double ticks_mean(std::int64_t ticks, std::uint64_t n) {
    return n == 0 ? 0.0 : static_cast<double>(ticks) / static_cast<double>(n) / static_cast<double>(SimTime::kTicksPerSecond);
}

class OutFile {
public:
    OutFile(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) {
            throw std::runtime_error("cannot write " + path.string());
        }
    }
    std::ofstream& stream() { return out_; }
    void close() {
        out_.close();
        if (!out_) {
            throw std::runtime_error("write failed: " + path_.string());
        }
    }

private:
    fs::path path_;
    std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
    OutFile f(path);
    f.stream() << text;
    f.close();
}

std::string packet_line(const Packet& p) {
    std::string s = std::to_string(p.id) + ',' + std::to_string(p.src) + ',' + std::to_string(p.dst) + ',' +
                    format_time(p.created) + ',';
    if (p.delivered_at) {
        s += format_time(*p.delivered_at);
    }
    s += ',' + std::to_string(p.hops) + ',' + format_time(p.queue_total) + ',' + format_time(p.tx_total) + ',' +
         format_time(p.prop_total) + ',' + std::string(to_string(p.status)) + '\n';
    return s;
}

std::unique_ptr<RoutingPolicy> make_policy(const ScenarioConfig& c, int num_sats, int num_gws, double rate_norm) {
    switch (c.policy) {
    case PolicyKind::shortest_path:
        return std::make_unique<ShortestPathPolicy>(c.scheme);
    case PolicyKind::q_routing: {
        std::optional<QTable> initial;
        if (!c.learning.import_path.empty()) {
            fs::path p = c.learning.import_path;
            if (fs::is_directory(p)) {
                p /= "q_table.csv";
            }
            try {
                initial = QTable::load_csv(p);
            } catch (const std::exception& e) {
                throw ConfigError("learning.import_path", e.what());
            }
        }
        return std::make_unique<QRoutingPolicy>(num_sats, num_gws, c.learning.q_routing(), c.seed, std::move(initial));
    }
    case PolicyKind::madrl: {
        std::optional<ModelPair> initial;
        if (!c.learning.import_path.empty()) {
            const fs::path dir = c.learning.import_path;
            try {
                initial = ModelPair{load_model(dir / "q_network.mlp"), load_model(dir / "q_target.mlp")};
            } catch (const std::exception& e) {
                throw ConfigError("learning.import_path", e.what());
            }
        } else if (c.learning.phase == MadrlPhase::online) {
            std::fprintf(stderr, "warning: online phase without learning.import_path; agents start from a "
                                 "random model\n");
        }
        return std::make_unique<MadrlPolicy>(num_sats, rate_norm, c.learning.madrl(), c.seed, std::move(initial));
    }
    }
    throw SimulationFault("unhandled policy kind");
}

void write_learning_log(const LearningLog& log, const fs::path& dir, std::vector<std::string>& files) {
    std::string r = "step,sim_time,reward\n";
    for (const RewardSample& s : log.rewards()) {
        r += std::to_string(s.step) + ',' + format_seconds(s.sim_time_s) + ',' + format_double(s.reward) + '\n';
    }
    write_text(dir / "rewards.csv", r);
    files.push_back("rewards.csv");
    std::string e = "step,sim_time,epsilon\n";
    for (const EpsilonSample& s : log.epsilon()) {
        e += std::to_string(s.step) + ',' + format_seconds(s.sim_time_s) + ',' + format_double(s.epsilon) + '\n';
    }
    write_text(dir / "epsilon.csv", e);
    files.push_back("epsilon.csv");
}

} // namespace

void LatencyTotals::add(const Packet& p) {
    if (p.status != PacketStatus::delivered || !p.delivered_at) {
        return;
    }
    ++delivered;
    e2e_ticks += (*p.delivered_at - p.created).ticks();
    queue_ticks += p.queue_total.ticks();
    tx_ticks += p.tx_total.ticks();
    prop_ticks += p.prop_total.ticks();
}

double LatencyTotals::mean_e2e_s() const { return ticks_mean(e2e_ticks, delivered); }
double LatencyTotals::mean_queue_s() const { return ticks_mean(queue_ticks, delivered); }
double LatencyTotals::mean_tx_s() const { return ticks_mean(tx_ticks, delivered); }
double LatencyTotals::mean_prop_s() const { return ticks_mean(prop_ticks, delivered); }

std::vector<GatewaySite> load_active_gateways(const ScenarioConfig& config) {
    std::vector<GatewaySite> sites;
    try {
        sites = load_gateway_sites(config.gateway_file());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("gateways.file", e.what());
    }
    if (static_cast<std::size_t>(config.gateways.count) > sites.size()) {
        throw ConfigError("gateways.count", "requested " + std::to_string(config.gateways.count) + " but " +
                                                config.gateway_file().string() + " lists " +
                                                std::to_string(sites.size()));
    }
    sites.resize(static_cast<std::size_t>(config.gateways.count));
    return sites;
}

LinkBudget make_link_budget(const ScenarioConfig& config) {
    std::optional<ModcodTable> table;
    try {
        table = ModcodTable::load_csv(config.modcod_path());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("radio.modcod_file", e.what());
    }
    return LinkBudget{config.isl, config.gsl_up, config.gsl_down, std::move(*table)};
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 unavailable");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char b[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(b, sizeof b, "%02x", md[i]);
        hex += b;
    }
    return hex;
}

RunSummary run_scenario(const ScenarioConfig& config) {
    config.validate();
    const fs::path dir = config.output_dir;
    fs::create_directories(dir);

    const std::vector<GatewaySite> gateways = load_active_gateways(config);
    const LinkBudget budget = make_link_budget(config);
    TopologyParams tparams;
    tparams.min_elevation_rad = deg_to_rad(config.gateways.min_elevation_deg);
    const int num_sats = config.constellation.num_satellites();
    const int num_gws = static_cast<int>(gateways.size());

    std::unique_ptr<RoutingPolicy> policy = make_policy(config, num_sats, num_gws, budget.max_rate());

    EngineConfig ec;
    ec.duration_s = config.duration_s;
    ec.update_interval_s = config.update_interval_s;
    ec.frozen_topology = config.frozen_topology;
    ec.queue_capacity = config.queue_capacity;
    ec.ttl_hops = config.ttl_hops;
    ec.packet_bits = config.packet_bits;
    ec.seed = config.seed;
    ec.record_paths = config.output.routes;
    ec.record_trace = config.output.trace;

    RunSummary summary;
    summary.output_dir = dir;
    std::vector<std::string>& files = summary.files;
    std::vector<std::string> invariant_samples;

    Simulator sim(std::make_unique<ConstellationTopology>(config.constellation, gateways, tparams, budget), *policy,
                  ec);

    std::string edges = snapshot_csv_header();
    auto inspect = [&](const TopologySnapshot& snap) {
        for (const std::string& v : snap.check_invariants(tparams.min_elevation_rad)) {
            ++summary.invariant_violations;
            if (invariant_samples.size() < 10) {
                invariant_samples.push_back("t=" + format_double(snap.epoch_s()) + " " + v);
            }
        }
        append_snapshot_csv(edges, snap);
    };
    inspect(sim.snapshot());
    sim.on_topology(inspect);

    // Node table at t = 0, for the map chart.
    {
        const TopologySnapshot& s0 = sim.snapshot();
        std::string nodes = "node,kind,name,lat_deg,lon_deg\n";
        for (NodeId n = 0; n < s0.num_nodes(); ++n) {
            const LatLon ll = to_lat_lon(s0.positions()[static_cast<std::size_t>(n)]);
            std::string name;
            if (s0.is_gateway(n)) {
                name = gateways[static_cast<std::size_t>(s0.gateway_index(n))].name;
            } else {
                const SatId id = s0.sat_id(n);
                name = "sat_" + std::to_string(id.plane) + "_" + std::to_string(id.index);
            }
            nodes += std::to_string(n) + ',' + (s0.is_gateway(n) ? "gateway" : "satellite") + ',' + name + ',' +
                     format_double(rad_to_deg(ll.latitude_rad)) + ',' + format_double(rad_to_deg(ll.longitude_rad)) +
                     '\n';
        }
        write_text(dir / "nodes.csv", nodes);
        files.push_back("nodes.csv");
    }

    std::optional<OutFile> packets;
    std::optional<OutFile> routes;
    std::optional<OutFile> queues;
    if (config.output.packets) {
        packets.emplace(dir / "packets.csv");
        packets->stream() << "# leosim-csv packets 1\n" << kPacketsHeader << '\n';
    }
    if (config.output.routes) {
        routes.emplace(dir / "routes.csv");
        routes->stream() << "# leosim-csv routes 1\npacket_id,src,dst,status,path\n";
    }
    if (config.output.queues) {
        queues.emplace(dir / "queues.csv");
        queues->stream() << "# leosim-csv queues 1\ntime,node,occupancy\n";
        sim.on_queue_sample([&](SimTime t, NodeId n, int occ) {
            queues->stream() << format_time(t) << ',' << n << ',' << occ << '\n';
        });
    }
    sim.on_packet_finished([&](const Packet& p) {
        summary.latency.add(p);
        if (packets) {
            packets->stream() << packet_line(p);
        }
        if (routes) {
            std::string path;
            for (const HopRecord& h : p.path) {
                if (!path.empty()) {
                    path += ';';
                }
                path += std::to_string(h.node);
            }
            routes->stream() << p.id << ',' << p.src << ',' << p.dst << ',' << to_string(p.status) << ',' << path
                             << '\n';
        }
    });

    TrafficSpec traffic;
    traffic.load_fraction = config.load_fraction;
    traffic.packet_bits = config.packet_bits;
    for (int g = 0; g < num_gws; ++g) {
        traffic.active_gateways.push_back(g);
    }
    sim.start_traffic(traffic);
    sim.run();
    sim.flush_in_flight();
    summary.counts = sim.conservation_audit();
    summary.rebuilds = sim.rebuild_count();
    summary.fifo_violations = sim.fifo_violations();
    summary.queue_bound_violations = sim.queue_bound_violations();
    summary.trace_hash = sim.trace_hash();
    summary.events = sim.events_executed();

    for (auto* f : {&packets, &routes, &queues}) {
        if (*f) {
            (*f)->close();
        }
    }
    if (packets) {
        files.push_back("packets.csv");
    }
    if (routes) {
        files.push_back("routes.csv");
    }
    if (queues) {
        files.push_back("queues.csv");
    }
    write_text(dir / "edges.csv", edges);
    files.push_back("edges.csv");

    // Link usage, most used first.
    std::vector<std::pair<std::uint64_t, std::pair<NodeId, NodeId>>> usage;
    for (const auto& [key, count] : sim.link_usage()) {
        usage.push_back({count, sim.decode_link(key)});
    }
    std::sort(usage.begin(), usage.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    {
        std::string u = "node_a,node_b,packets\n";
        for (const auto& [count, link] : usage) {
            u += std::to_string(link.first) + ',' + std::to_string(link.second) + ',' + std::to_string(count) + '\n';
        }
        write_text(dir / "link_usage.csv", u);
        files.push_back("link_usage.csv");
    }

    if (config.output.trace) {
        std::string t = "time,seq,kind,node,packet\n";
        for (const TraceEntry& e : sim.trace()) {
            t += format_time(e.time) + ',' + std::to_string(e.seq) + ',' + std::string(to_string(e.kind)) + ',' +
                 std::to_string(e.node) + ',' + std::to_string(e.packet) + '\n';
        }
        write_text(dir / "trace.csv", t);
        files.push_back("trace.csv");
    }

    if (auto* q = dynamic_cast<QRoutingPolicy*>(policy.get())) {
        q->log().flush();
        write_learning_log(q->log(), dir, files);
        if (config.output.save_models) {
            q->table().save_csv(dir / "q_table.csv");
            files.push_back("q_table.csv");
        }
    }
    if (auto* m = dynamic_cast<MadrlPolicy*>(policy.get())) {
        m->log().flush();
        write_learning_log(m->log(), dir, files);
        save_probe_states(m->probe_states(), dir / "probes.csv");
        files.push_back("probes.csv");
        if (config.output.save_models) {
            // Online runs store the common starting point plus every agent.
            const ModelPair& shared = m->phase() == MadrlPhase::offline ? m->models(0) : m->initial_models();
            save_model(shared.online, dir / "q_network.mlp");
            save_model(shared.target, dir / "q_target.mlp");
            files.push_back("q_network.mlp");
            files.push_back("q_target.mlp");
            if (m->phase() == MadrlPhase::online) {
                std::vector<MlpModel> agents;
                for (int s = 0; s < num_sats; ++s) {
                    agents.push_back(m->models(s).online);
                }
                save_agent_models(agents, dir / "agents");
                for (int s = 0; s < num_sats; ++s) {
                    files.push_back("agents/" + agent_model_filename(s));
                }
            }
        }
    }

    ChartReport charts;
    if (config.output.charts) {
        charts = render_charts(dir, dir / "charts",
                               std::string(to_string(config.policy)) + "/" + std::string(to_string(config.scheme)));
        for (const std::string& f : charts.written) {
            files.push_back("charts/" + f);
        }
    }

    // run.log
    {
        const AuditCounts& c = summary.counts;
        const LatencyTotals& l = summary.latency;
        std::string log;
        char line[256];
        auto add = [&](const std::string& s) { log += s + '\n'; };
        add("leosim " + std::string(kVersion));
        add("policy " + policy->name());
        add("constellation " + config.constellation.name + " planes " + std::to_string(config.constellation.num_planes) +
            " sats_per_plane " + std::to_string(config.constellation.sats_per_plane) + " altitude_km " +
            format_double(config.constellation.altitude_m / 1e3) + " walker " +
            std::string(to_string(config.constellation.walker)));
        std::string gw_names;
        for (const GatewaySite& g : gateways) {
            gw_names += (gw_names.empty() ? "" : ",") + g.name;
        }
        add("gateways " + std::to_string(num_gws) + " " + gw_names);
        add("seed " + std::to_string(config.seed));
        add("duration_s " + format_double(config.duration_s));
        add("topology_rebuilds " + std::to_string(summary.rebuilds));
        add("flows " + std::to_string(sim.flows().size()));
        add("events " + std::to_string(summary.events));
        add("packets_created " + std::to_string(c.created));
        add("packets_delivered " + std::to_string(c.delivered));
        add("packets_dropped " + std::to_string(c.dropped));
        add("packets_stuck " + std::to_string(c.stuck));
        add("packets_in_flight " + std::to_string(c.in_flight));
        add("mean_e2e_s " + format_double(l.mean_e2e_s()));
        add("mean_queue_s " + format_double(l.mean_queue_s()));
        add("mean_tx_s " + format_double(l.mean_tx_s()));
        add("mean_prop_s " + format_double(l.mean_prop_s()));
        add("fifo_violations " + std::to_string(summary.fifo_violations));
        add("queue_bound_violations " + std::to_string(summary.queue_bound_violations));
        add("snapshot_invariant_violations " + std::to_string(summary.invariant_violations));
        for (const std::string& v : invariant_samples) {
            add("  " + v);
        }
        std::snprintf(line, sizeof line, "trace_hash %016" PRIx64, summary.trace_hash);
        add(line);
        for (const auto& [chart, reason] : charts.failures) {
            add("chart_skipped " + chart + ": " + reason);
        }
        add("most_used_links (top 20)");
        add("  rank,node_a,node_b,packets");
        for (std::size_t i = 0; i < usage.size() && i < 20; ++i) {
            add("  " + std::to_string(i + 1) + ',' + std::to_string(usage[i].second.first) + ',' +
                std::to_string(usage[i].second.second) + ',' + std::to_string(usage[i].first));
        }
        write_text(dir / "run.log", log);
        files.push_back("run.log");
    }

    // Manifest, written last so it can hash everything else.
    json manifest;
    manifest["format"] = "leosim-manifest 1";
    manifest["version"] = std::string(kVersion);
    manifest["seed"] = config.seed;
    json names = json::array();
    for (const GatewaySite& g : gateways) {
        names.push_back(g.name);
    }
    manifest["fingerprint"] = {{"constellation", config_to_json(config)["constellation"]},
                               {"gateways", names},
                               {"duration_s", config.duration_s}};
    manifest["config"] = config_to_json(config);
    manifest["summary"] = {{"created", summary.counts.created},
                           {"delivered", summary.counts.delivered},
                           {"dropped", summary.counts.dropped},
                           {"stuck", summary.counts.stuck},
                           {"in_flight", summary.counts.in_flight},
                           {"topology_rebuilds", summary.rebuilds},
                           {"snapshot_invariant_violations", summary.invariant_violations},
                           {"fifo_violations", summary.fifo_violations},
                           {"queue_bound_violations", summary.queue_bound_violations}};
    json listing = json::array();
    for (const std::string& f : files) {
        listing.push_back({{"path", f}, {"sha256", sha256_file(dir / f)}, {"bytes", fs::file_size(dir / f)}});
    }
    manifest["files"] = listing;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return summary;
}

} // namespace leosim
