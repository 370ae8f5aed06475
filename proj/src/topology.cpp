#include "leosim/topology.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <utility>

namespace leosim {

std::string_view to_string(LinkKind kind) {
    switch (kind) {
    case LinkKind::isl_intra:
        return "isl_intra";
    case LinkKind::isl_inter:
        return "isl_inter";
    case LinkKind::gsl:
        return "gsl";
    }
    return "?";
}

TopologySnapshot::TopologySnapshot(double epoch_s, int num_satellites, int num_gateways, std::vector<Edge> edges,
                                   GridLayout layout, std::vector<Vec3> positions)
    : epoch_s_(epoch_s), num_satellites_(num_satellites), num_gateways_(num_gateways), layout_(layout),
      edges_(std::move(edges)), positions_(std::move(positions)) {
    const int n = num_nodes();
    incident_.assign(static_cast<std::size_t>(n), {});
    slots_.assign(static_cast<std::size_t>(num_satellites_), {-1, -1, -1, -1, -1});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n || e.a == e.b) {
            throw SimulationFault("edge " + std::to_string(i) + " has invalid endpoints");
        }
        incident_[static_cast<std::size_t>(e.a)].push_back(static_cast<int>(i));
        incident_[static_cast<std::size_t>(e.b)].push_back(static_cast<int>(i));
        if (layout_.empty()) {
            continue;
        }
        const int idx = static_cast<int>(i);
        auto slot = [&](NodeId sat, LinkSlot s) -> int& {
            return slots_[static_cast<std::size_t>(sat)][static_cast<std::size_t>(s)];
        };
        switch (e.kind) {
        case LinkKind::isl_intra:
            slot(e.a, LinkSlot::intra_forward) = idx;
            slot(e.b, LinkSlot::intra_backward) = idx;
            if (layout_.sats_per_plane == 2) {
                slot(e.a, LinkSlot::intra_backward) = idx;
                slot(e.b, LinkSlot::intra_forward) = idx;
            }
            break;
        case LinkKind::isl_inter:
            slot(e.a, LinkSlot::inter_east) = idx;
            slot(e.b, LinkSlot::inter_west) = idx;
            break;
        case LinkKind::gsl:
            if (!is_gateway(e.a)) {
                slot(e.a, LinkSlot::down_to_gateway) = idx;
            }
            break;
        }
    }
}

SatId TopologySnapshot::sat_id(NodeId n) const {
    if (layout_.empty()) {
        return {0, n};
    }
    return {n / layout_.sats_per_plane, n % layout_.sats_per_plane};
}

int TopologySnapshot::find_edge(NodeId u, NodeId v) const {
    if (u < 0 || u >= num_nodes()) {
        return -1;
    }
    for (int e : incident_[static_cast<std::size_t>(u)]) {
        if (edges_[static_cast<std::size_t>(e)].other(u) == v) {
            return e;
        }
    }
    return -1;
}

int TopologySnapshot::slot_edge(NodeId sat, LinkSlot slot) const {
    if (sat < 0 || sat >= num_satellites_ || layout_.empty()) {
        return -1;
    }
    return slots_[static_cast<std::size_t>(sat)][static_cast<std::size_t>(slot)];
}

std::optional<NodeId> TopologySnapshot::gateway_satellite(int gw_index) const {
    const NodeId gw = gateway_node(gw_index);
    for (int e : incident_[static_cast<std::size_t>(gw)]) {
        const Edge& edge = edges_[static_cast<std::size_t>(e)];
        if (edge.kind == LinkKind::gsl) {
            return edge.other(gw);
        }
    }
    return std::nullopt;
}

void TopologySnapshot::set_rates(std::size_t edge, double rate_ab_bps, double rate_ba_bps) {
    edges_.at(edge).rate_ab_bps = rate_ab_bps;
    edges_.at(edge).rate_ba_bps = rate_ba_bps;
}

bool TopologySnapshot::same_edges(const TopologySnapshot& other) const {
    if (edges_.size() != other.edges_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& x = edges_[i];
        const Edge& y = other.edges_[i];
        if (x.a != y.a || x.b != y.b || x.kind != y.kind) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> TopologySnapshot::check_invariants(std::optional<double> min_elevation_rad) const {
    std::vector<std::string> violations;
    auto fail = [&](std::string msg) { violations.push_back(std::move(msg)); };

    std::set<std::pair<NodeId, NodeId>> seen;
    std::vector<int> intra(static_cast<std::size_t>(num_nodes()), 0);
    std::vector<int> east(static_cast<std::size_t>(num_nodes()), 0);
    std::vector<int> west(static_cast<std::size_t>(num_nodes()), 0);
    std::vector<int> gsl(static_cast<std::size_t>(num_nodes()), 0);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        const std::string tag = "edge " + std::to_string(e.a) + "-" + std::to_string(e.b);
        if (!(e.distance_m > 0.0)) {
            fail(tag + ": distance not positive");
        }
        if (!(e.rate_ab_bps >= 0.0) || !(e.rate_ba_bps >= 0.0)) {
            fail(tag + ": negative rate");
        }
        if (!seen.insert(std::minmax(e.a, e.b)).second) {
            fail(tag + ": duplicate link");
        }
        if (find_edge(e.a, e.b) != static_cast<int>(i) || find_edge(e.b, e.a) != static_cast<int>(i)) {
            fail(tag + ": not traversable in both directions");
        }
        switch (e.kind) {
        case LinkKind::isl_intra:
            if (is_gateway(e.a) || is_gateway(e.b)) {
                fail(tag + ": ISL touches a gateway");
            }
            ++intra[static_cast<std::size_t>(e.a)];
            ++intra[static_cast<std::size_t>(e.b)];
            break;
        case LinkKind::isl_inter:
            if (is_gateway(e.a) || is_gateway(e.b)) {
                fail(tag + ": ISL touches a gateway");
            }
            ++east[static_cast<std::size_t>(e.a)];
            ++west[static_cast<std::size_t>(e.b)];
            break;
        case LinkKind::gsl:
            if (is_gateway(e.a) == is_gateway(e.b)) {
                fail(tag + ": GSL must join a satellite and a gateway");
            }
            ++gsl[static_cast<std::size_t>(e.a)];
            ++gsl[static_cast<std::size_t>(e.b)];
            break;
        }
    }
    for (NodeId n = 0; n < num_nodes(); ++n) {
        const auto u = static_cast<std::size_t>(n);
        const std::string tag = "node " + std::to_string(n);
        if (intra[u] > 2) {
            fail(tag + ": more than 2 intra-plane ISLs");
        }
        if (east[u] > 1 || west[u] > 1) {
            fail(tag + ": more than 1 inter-plane ISL on one side");
        }
        if (gsl[u] > 1) {
            fail(tag + ": more than 1 GSL");
        }
    }
    if (min_elevation_rad && positions_.size() == static_cast<std::size_t>(num_nodes())) {
        for (int g = 0; g < num_gateways_; ++g) {
            const NodeId gw = gateway_node(g);
            if (gsl[static_cast<std::size_t>(gw)] == 1) {
                continue;
            }
            for (NodeId s = 0; s < num_satellites_; ++s) {
                if (gsl[static_cast<std::size_t>(s)] == 0 &&
                    elevation(positions_[static_cast<std::size_t>(gw)], positions_[static_cast<std::size_t>(s)]) >=
                        *min_elevation_rad) {
                    fail("gateway " + std::to_string(g) + ": unconnected although satellite " + std::to_string(s) +
                         " is visible and free");
                    break;
                }
            }
        }
    }
    return violations;
}

double elevation(const Vec3& ground, const Vec3& target) {
    const Vec3 los = target - ground;
    const double range = los.norm();
    const double gnorm = ground.norm();
    if (range == 0.0 || gnorm == 0.0) {
        return kPi / 2.0;
    }
    const double s = los.dot(ground) / (range * gnorm);
    return std::asin(std::clamp(s, -1.0, 1.0));
}

bool chord_clears_earth(const Vec3& a, const Vec3& b) {
    const Vec3 d = b - a;
    const double len2 = d.dot(d);
    double t = len2 > 0.0 ? -a.dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + d * t).norm() > kEarthRadius;
}

bool visible(const Vec3& a, const Vec3& b, double min_elevation_rad) {
    constexpr double kGroundSlack = 1.0; // m
    const bool a_ground = a.norm() <= kEarthRadius + kGroundSlack;
    const bool b_ground = b.norm() <= kEarthRadius + kGroundSlack;
    if (a_ground) {
        return elevation(a, b) >= min_elevation_rad;
    }
    if (b_ground) {
        return elevation(b, a) >= min_elevation_rad;
    }
    return chord_clears_earth(a, b);
}

GridLayout layout_of(const ConstellationSpec& spec) {
    return {spec.num_planes, spec.sats_per_plane, spec.walker};
}

namespace {

const Vec3& pos(std::span<const SatelliteState> states, NodeId n) {
    return states[static_cast<std::size_t>(n)].position;
}

void check_layout(std::span<const SatelliteState> states, const GridLayout& layout) {
    if (static_cast<long>(states.size()) != static_cast<long>(layout.num_planes) * layout.sats_per_plane) {
        throw SimulationFault("satellite state count does not match the constellation layout");
    }
}

} // namespace

std::vector<Edge> match_intra_plane(std::span<const SatelliteState> states, const GridLayout& layout) {
    check_layout(states, layout);
    std::vector<Edge> edges;
    const int n = layout.sats_per_plane;
    if (n < 2) {
        return edges;
    }
    for (int p = 0; p < layout.num_planes; ++p) {
        // N = 2: k+1 and k-1 name the same neighbour, keep one link.
        const int links = n == 2 ? 1 : n;
        for (int k = 0; k < links; ++k) {
            const NodeId a = p * n + k;
            const NodeId b = p * n + (k + 1) % n;
            if (!chord_clears_earth(pos(states, a), pos(states, b))) {
                continue;
            }
            edges.push_back({a, b, LinkKind::isl_intra, distance(pos(states, a), pos(states, b))});
        }
    }
    return edges;
}

std::vector<Edge> match_inter_plane_greedy(std::span<const SatelliteState> states, const GridLayout& layout) {
    check_layout(states, layout);
    std::vector<Edge> edges;
    const int planes = layout.num_planes;
    const int n = layout.sats_per_plane;
    if (planes < 2) {
        return edges;
    }
    std::vector<std::pair<int, int>> plane_pairs;
    for (int p = 0; p + 1 < planes; ++p) {
        plane_pairs.emplace_back(p, p + 1);
    }
    if (layout.walker == WalkerKind::delta && planes >= 3) {
        plane_pairs.emplace_back(planes - 1, 0);
    }

    struct Candidate {
        double distance;
        NodeId west;
        NodeId east;
    };
    std::vector<Candidate> candidates;
    std::vector<char> east_used(states.size(), 0);
    std::vector<char> west_used(states.size(), 0);
    for (const auto& [wp, ep] : plane_pairs) {
        candidates.clear();
        for (int i = 0; i < n; ++i) {
            const NodeId w = wp * n + i;
            for (int j = 0; j < n; ++j) {
                const NodeId e = ep * n + j;
                if (!chord_clears_earth(pos(states, w), pos(states, e))) {
                    continue;
                }
                candidates.push_back({distance(pos(states, w), pos(states, e)), w, e});
            }
        }
        // Ties resolved by the lower (plane, index) endpoints.
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
            return std::tie(x.distance, x.west, x.east) < std::tie(y.distance, y.west, y.east);
        });
        for (const auto& c : candidates) {
            if (east_used[static_cast<std::size_t>(c.west)] || west_used[static_cast<std::size_t>(c.east)]) {
                continue;
            }
            east_used[static_cast<std::size_t>(c.west)] = 1;
            west_used[static_cast<std::size_t>(c.east)] = 1;
            edges.push_back({c.west, c.east, LinkKind::isl_inter, c.distance});
        }
    }
    return edges;
}

std::vector<Edge> match_gsl(std::span<const SatelliteState> states, std::span<const Vec3> gateways,
                            double min_elevation_rad, NodeId first_gateway_node) {
    struct Candidate {
        double distance;
        int gw;
        NodeId sat;
    };
    std::vector<Candidate> candidates;
    for (std::size_t g = 0; g < gateways.size(); ++g) {
        for (std::size_t s = 0; s < states.size(); ++s) {
            if (elevation(gateways[g], states[s].position) >= min_elevation_rad) {
                candidates.push_back({distance(gateways[g], states[s].position), static_cast<int>(g),
                                      static_cast<NodeId>(s)});
            }
        }
    }
    // Closest gateway-satellite pair first; a satellite serves one gateway.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        return std::tie(x.distance, x.gw, x.sat) < std::tie(y.distance, y.gw, y.sat);
    });
    std::vector<char> gw_used(gateways.size(), 0);
    std::vector<char> sat_used(states.size(), 0);
    std::vector<Edge> edges;
    for (const auto& c : candidates) {
        if (gw_used[static_cast<std::size_t>(c.gw)] || sat_used[static_cast<std::size_t>(c.sat)]) {
            continue;
        }
        gw_used[static_cast<std::size_t>(c.gw)] = 1;
        sat_used[static_cast<std::size_t>(c.sat)] = 1;
        edges.push_back({c.sat, first_gateway_node + c.gw, LinkKind::gsl, c.distance});
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.b < y.b; });
    return edges;
}

TopologySnapshot build_topology(double epoch_s, std::span<const SatelliteState> states, const GridLayout& layout,
                                std::span<const Vec3> gateways, const TopologyParams& params) {
    std::vector<Edge> edges = match_intra_plane(states, layout);
    auto inter = match_inter_plane_greedy(states, layout);
    edges.insert(edges.end(), inter.begin(), inter.end());
    const auto num_sats = static_cast<NodeId>(states.size());
    auto gsl = match_gsl(states, gateways, params.min_elevation_rad, num_sats);
    edges.insert(edges.end(), gsl.begin(), gsl.end());

    std::vector<Vec3> positions;
    positions.reserve(states.size() + gateways.size());
    for (const auto& s : states) {
        positions.push_back(s.position);
    }
    positions.insert(positions.end(), gateways.begin(), gateways.end());
    return TopologySnapshot(epoch_s, num_sats, static_cast<int>(gateways.size()), std::move(edges), layout,
                            std::move(positions));
}

TopologySnapshot rebuild(double epoch_s, std::span<const SatelliteState> states, std::span<const Vec3> gateways,
                         const TopologySnapshot& previous, const TopologyParams& params) {
    if (static_cast<int>(states.size()) != previous.num_satellites() ||
        static_cast<int>(gateways.size()) != previous.num_gateways()) {
        throw SimulationFault("rebuild changed the node set");
    }
    return build_topology(epoch_s, states, previous.layout(), gateways, params);
}

std::string snapshot_csv_header() {
    return "epoch,node_a,node_b,kind,distance_m,rate_bps\n";
}

void append_snapshot_csv(std::string& out, const TopologySnapshot& snapshot) {
    const std::string epoch = format_double(snapshot.epoch_s());
    for (const Edge& e : snapshot.edges()) {
        out += epoch;
        out += ',';
        out += std::to_string(e.a);
        out += ',';
        out += std::to_string(e.b);
        out += ',';
        out += to_string(e.kind);
        out += ',';
        out += format_double(e.distance_m);
        out += ',';
        out += format_double(e.rate_ab_bps);
        out += '\n';
    }
}

} // namespace leosim
