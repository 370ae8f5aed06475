#include "leosim/routing_classic.hpp"

#include "leosim/errors.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>

namespace leosim {

std::string_view to_string(WeightScheme scheme) {
    switch (scheme) {
    case WeightScheme::data_rate:
        return "data_rate";
    case WeightScheme::slant_range:
        return "slant_range";
    case WeightScheme::hop:
        return "hop";
    }
    return "?";
}

WeightScheme parse_weight_scheme(std::string_view text) {
    if (text == "data_rate") {
        return WeightScheme::data_rate;
    }
    if (text == "slant_range") {
        return WeightScheme::slant_range;
    }
    if (text == "hop") {
        return WeightScheme::hop;
    }
    throw ConfigError("routing.scheme", "expected data_rate, slant_range or hop, got '" + std::string(text) + "'");
}

std::optional<double> edge_weight(const Edge& edge, NodeId from, WeightScheme scheme) {
    const double rate = edge.rate_from(from);
    if (!(rate > 0.0)) {
        return std::nullopt;
    }
    switch (scheme) {
    case WeightScheme::data_rate:
        return 1.0 / rate;
    case WeightScheme::slant_range:
        return edge.distance_m;
    case WeightScheme::hop:
        return 1.0;
    }
    return std::nullopt;
}

ShortestPathTree dijkstra_to(const TopologySnapshot& snapshot, NodeId destination, WeightScheme scheme) {
    const auto n = static_cast<std::size_t>(snapshot.num_nodes());
    constexpr double kInf = std::numeric_limits<double>::infinity();
    ShortestPathTree tree;
    tree.destination = destination;
    tree.cost.assign(n, kInf);
    tree.next.assign(n, -1);

    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    std::vector<char> done(n, 0);
    tree.cost[static_cast<std::size_t>(destination)] = 0.0;
    heap.emplace(0.0, destination);
    const auto& edges = snapshot.edges();
    while (!heap.empty()) {
        const auto [c, v] = heap.top();
        heap.pop();
        if (done[static_cast<std::size_t>(v)]) {
            continue;
        }
        done[static_cast<std::size_t>(v)] = 1;
        if (v != destination && snapshot.is_gateway(v)) {
            continue; // no transit through other gateways
        }
        // Relax predecessors u with a usable u -> v direction.
        for (int ei : snapshot.incident(v)) {
            const Edge& e = edges[static_cast<std::size_t>(ei)];
            const NodeId u = e.other(v);
            const auto w = edge_weight(e, u, scheme);
            if (!w) {
                continue;
            }
            const double cand = c + *w;
            if (cand < tree.cost[static_cast<std::size_t>(u)]) {
                tree.cost[static_cast<std::size_t>(u)] = cand;
                heap.emplace(cand, u);
            }
        }
    }

    // Next hop: the smallest-id neighbour on some minimum-cost path. Costs of
    // successors strictly decrease, so the chains are loop-free.
    for (NodeId u = 0; u < static_cast<NodeId>(n); ++u) {
        const double cu = tree.cost[static_cast<std::size_t>(u)];
        if (u == destination || cu == kInf) {
            continue;
        }
        const double tol = 1e-12 * cu;
        NodeId best = -1;
        for (int ei : snapshot.incident(u)) {
            const Edge& e = edges[static_cast<std::size_t>(ei)];
            const NodeId v = e.other(u);
            if (v != destination && snapshot.is_gateway(v)) {
                continue;
            }
            const auto w = edge_weight(e, u, scheme);
            if (!w) {
                continue;
            }
            const double cv = tree.cost[static_cast<std::size_t>(v)];
            if (cv < cu && *w + cv <= cu + tol && (best < 0 || v < best)) {
                best = v;
            }
        }
        tree.next[static_cast<std::size_t>(u)] = best;
    }
    return tree;
}

RouteTable::RouteTable(double epoch_s, int num_nodes, int num_satellites, int num_gateways)
    : epoch_s_(epoch_s), num_nodes_(num_nodes), num_satellites_(num_satellites), num_gateways_(num_gateways),
      next_(static_cast<std::size_t>(num_nodes) * static_cast<std::size_t>(num_gateways), -1),
      cost_(next_.size(), std::numeric_limits<double>::infinity()) {}

std::size_t RouteTable::slot(NodeId node, NodeId dst) const {
    const int g = dst - num_satellites_;
    if (node < 0 || node >= num_nodes_ || g < 0 || g >= num_gateways_) {
        return next_.size();
    }
    return static_cast<std::size_t>(node) * static_cast<std::size_t>(num_gateways_) + static_cast<std::size_t>(g);
}

std::optional<NodeId> RouteTable::next_hop(NodeId node, NodeId dst) const {
    const auto s = slot(node, dst);
    if (s >= next_.size() || next_[s] < 0) {
        return std::nullopt;
    }
    return next_[s];
}

double RouteTable::cost(NodeId node, NodeId dst) const {
    const auto s = slot(node, dst);
    return s < cost_.size() ? cost_[s] : std::numeric_limits<double>::infinity();
}

std::vector<NodeId> RouteTable::path(NodeId src, NodeId dst) const {
    std::vector<NodeId> out{src};
    NodeId at = src;
    while (at != dst) {
        const auto nh = next_hop(at, dst);
        if (!nh || static_cast<int>(out.size()) > num_nodes_) {
            return {};
        }
        at = *nh;
        out.push_back(at);
    }
    return out;
}

void RouteTable::set(NodeId node, NodeId dst, NodeId next, double cost) {
    const auto s = slot(node, dst);
    if (s >= next_.size()) {
        throw SimulationFault("route table slot out of range");
    }
    next_[s] = next;
    cost_[s] = cost;
}

RouteTable shortest_paths(const TopologySnapshot& snapshot, WeightScheme scheme) {
    RouteTable table(snapshot.epoch_s(), snapshot.num_nodes(), snapshot.num_satellites(), snapshot.num_gateways());
    for (int g = 0; g < snapshot.num_gateways(); ++g) {
        const NodeId dst = snapshot.gateway_node(g);
        const auto tree = dijkstra_to(snapshot, dst, scheme);
        for (NodeId u = 0; u < snapshot.num_nodes(); ++u) {
            const auto iu = static_cast<std::size_t>(u);
            if (tree.next[iu] >= 0 || u == dst) {
                table.set(u, dst, tree.next[iu], tree.cost[iu]);
            }
        }
    }
    return table;
}

std::string ShortestPathPolicy::name() const {
    return "shortest_path/" + std::string(to_string(scheme_));
}

void ShortestPathPolicy::on_topology(const TopologySnapshot& snapshot) {
    table_ = shortest_paths(snapshot, scheme_);
}

std::optional<NodeId> ShortestPathPolicy::next_hop(const NetworkView& /*view*/, NodeId node, const PacketView& packet) {
    return table_.next_hop(node, packet.dst);
}

} // namespace leosim
