#pragma once

#include "leosim/orbit.hpp"
#include "leosim/units.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace leosim {

// Satellites occupy node ids [0, S) as plane * N + index; gateways follow at
// [S, S + G) in gateway order.
using NodeId = int;

enum class LinkKind { isl_intra, isl_inter, gsl };
std::string_view to_string(LinkKind kind);

// The five antennas of a satellite, in action-index order.
enum class LinkSlot : int { intra_forward = 0, intra_backward = 1, inter_east = 2, inter_west = 3, down_to_gateway = 4 };
inline constexpr int kNumLinkSlots = 5;

// Bidirectional link, stored once. Intra-plane: a = (p, k), b = (p, k+1).
// Inter-plane: a is the western endpoint (uses its east antenna). GSL: a is the
// satellite, b the gateway.
struct Edge {
    NodeId a = 0;
    NodeId b = 0;
    LinkKind kind = LinkKind::isl_intra;
    double distance_m = 0.0;
    double rate_ab_bps = 0.0;
    double rate_ba_bps = 0.0;

    NodeId other(NodeId n) const { return n == a ? b : a; }
    double rate_from(NodeId from) const { return from == a ? rate_ab_bps : rate_ba_bps; }
};

struct GridLayout {
    int num_planes = 0;
    int sats_per_plane = 0;
    WalkerKind walker = WalkerKind::star;

    bool empty() const { return num_planes == 0; }
};

// The graph G_t at one epoch. Immutable once rates are assigned.
class TopologySnapshot {
public:
    TopologySnapshot() = default;
    TopologySnapshot(double epoch_s, int num_satellites, int num_gateways, std::vector<Edge> edges,
                     GridLayout layout = {}, std::vector<Vec3> positions = {});

    double epoch_s() const { return epoch_s_; }
    int num_satellites() const { return num_satellites_; }
    int num_gateways() const { return num_gateways_; }
    int num_nodes() const { return num_satellites_ + num_gateways_; }
    const GridLayout& layout() const { return layout_; }

    bool is_gateway(NodeId n) const { return n >= num_satellites_; }
    NodeId gateway_node(int gw_index) const { return num_satellites_ + gw_index; }
    int gateway_index(NodeId n) const { return n - num_satellites_; }
    SatId sat_id(NodeId n) const;
    NodeId sat_node(SatId id) const { return id.plane * layout_.sats_per_plane + id.index; }

    const std::vector<Edge>& edges() const { return edges_; }
    std::span<const int> incident(NodeId n) const { return incident_[static_cast<std::size_t>(n)]; }
    // Index of the edge joining u and v, or -1.
    int find_edge(NodeId u, NodeId v) const;
    // Edge index behind a satellite antenna slot, or -1 (also -1 for gateways
    // and for snapshots without a grid layout).
    int slot_edge(NodeId sat, LinkSlot slot) const;
    // Serving satellite of a gateway, if it has a GSL.
    std::optional<NodeId> gateway_satellite(int gw_index) const;

    // ECEF positions per node (may be empty for hand-built graphs).
    const std::vector<Vec3>& positions() const { return positions_; }

    void set_rates(std::size_t edge, double rate_ab_bps, double rate_ba_bps);

    // Structural invariants; returns human-readable violations (empty when
    // valid). With min_elevation, also checks that an unconnected gateway has
    // no free visible satellite.
    std::vector<std::string> check_invariants(std::optional<double> min_elevation_rad = std::nullopt) const;

    bool same_edges(const TopologySnapshot& other) const;

private:
    double epoch_s_ = 0.0;
    int num_satellites_ = 0;
    int num_gateways_ = 0;
    GridLayout layout_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> incident_;
    std::vector<std::array<int, kNumLinkSlots>> slots_;
    std::vector<Vec3> positions_;
};

struct TopologyParams {
    double min_elevation_rad = deg_to_rad(10.0);
};

// Elevation of target above the local horizon of a ground point, radians.
double elevation(const Vec3& ground, const Vec3& target);
// Straight segment a-b does not intersect the Earth sphere.
bool chord_clears_earth(const Vec3& a, const Vec3& b);
// Line-of-sight gate: elevation test when either end is on the ground,
// Earth-blockage test between two satellites.
bool visible(const Vec3& a, const Vec3& b, double min_elevation_rad = deg_to_rad(10.0));

std::vector<Edge> match_intra_plane(std::span<const SatelliteState> states, const GridLayout& layout);
std::vector<Edge> match_inter_plane_greedy(std::span<const SatelliteState> states, const GridLayout& layout);
// Gateway g becomes node first_gateway_node + g.
std::vector<Edge> match_gsl(std::span<const SatelliteState> states, std::span<const Vec3> gateways,
                            double min_elevation_rad, NodeId first_gateway_node);

TopologySnapshot build_topology(double epoch_s, std::span<const SatelliteState> states, const GridLayout& layout,
                                std::span<const Vec3> gateways, const TopologyParams& params = {});

// Full re-match at new positions; node identities must match the previous
// snapshot so per-node state owned elsewhere (queues) stays valid.
TopologySnapshot rebuild(double epoch_s, std::span<const SatelliteState> states, std::span<const Vec3> gateways,
                         const TopologySnapshot& previous, const TopologyParams& params = {});

GridLayout layout_of(const ConstellationSpec& spec);

// CSV rows: epoch,node_a,node_b,kind,distance_m,rate_bps
std::string snapshot_csv_header();
void append_snapshot_csv(std::string& out, const TopologySnapshot& snapshot);

} // namespace leosim
