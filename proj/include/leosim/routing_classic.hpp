#pragma once

#include "leosim/policy.hpp"
#include "leosim/topology.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace leosim {

enum class WeightScheme { data_rate, slant_range, hop };

std::string_view to_string(WeightScheme scheme);
WeightScheme parse_weight_scheme(std::string_view text);

// Cost of traversing `edge` from `from`; nullopt when the link cannot carry
// traffic in that direction (zero rate).
std::optional<double> edge_weight(const Edge& edge, NodeId from, WeightScheme scheme);

// Single-destination shortest paths. Gateways other than the destination are
// never used as transit nodes. Among equal-cost paths the lexicographically
// smallest node sequence wins.
struct ShortestPathTree {
    NodeId destination = 0;
    std::vector<double> cost; // +inf when unreachable
    std::vector<NodeId> next; // -1 when unreachable or at the destination
};

ShortestPathTree dijkstra_to(const TopologySnapshot& snapshot, NodeId destination, WeightScheme scheme);

class RouteTable {
public:
    RouteTable() = default;
    RouteTable(double epoch_s, int num_nodes, int num_satellites, int num_gateways);

    double epoch_s() const { return epoch_s_; }
    // Next node from `node` towards gateway node `dst`; nullopt if absent.
    std::optional<NodeId> next_hop(NodeId node, NodeId dst) const;
    double cost(NodeId node, NodeId dst) const;
    // Node sequence from src to dst (empty if unreachable).
    std::vector<NodeId> path(NodeId src, NodeId dst) const;

    void set(NodeId node, NodeId dst, NodeId next, double cost);

private:
    std::size_t slot(NodeId node, NodeId dst) const;

    double epoch_s_ = 0.0;
    int num_nodes_ = 0;
    int num_satellites_ = 0;
    int num_gateways_ = 0;
    std::vector<NodeId> next_;
    std::vector<double> cost_;
};

// One Dijkstra per destination gateway.
RouteTable shortest_paths(const TopologySnapshot& snapshot, WeightScheme scheme);

// Centralised policy with full knowledge; tables rebuilt at every topology update.
class ShortestPathPolicy final : public RoutingPolicy {
public:
    explicit ShortestPathPolicy(WeightScheme scheme) : scheme_(scheme) {}

    std::string name() const override;
    void on_topology(const TopologySnapshot& snapshot) override;
    std::optional<NodeId> next_hop(const NetworkView& view, NodeId node, const PacketView& packet) override;

    const RouteTable& table() const { return table_; }
    WeightScheme scheme() const { return scheme_; }

private:
    WeightScheme scheme_;
    RouteTable table_;
};

} // namespace leosim
