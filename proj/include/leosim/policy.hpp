#pragma once

#include "leosim/topology.hpp"
#include "leosim/units.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace leosim {

using PacketId = std::int64_t;

// Read-only view of the network a policy may consult when deciding.
class NetworkView {
public:
    virtual ~NetworkView() = default;
    virtual const TopologySnapshot& snapshot() const = 0;
    virtual int queue_length(NodeId node) const = 0;
    virtual int queue_capacity() const = 0;
    virtual SimTime now() const = 0;
};

struct PacketView {
    PacketId id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    int hops = 0;
};

enum class HopOutcome { forwarded, delivered, dropped, stuck };

// Reported when a transmitted packet reaches the next node.
struct HopFeedback {
    PacketId packet_id = 0;
    NodeId from = 0;
    NodeId to = 0;
    NodeId dst = 0;
    SimTime queue_time;
    SimTime tx_time;
    SimTime prop_time;
    HopOutcome outcome = HopOutcome::forwarded;

    SimTime latency() const { return queue_time + tx_time + prop_time; }
};

class RoutingPolicy {
public:
    virtual ~RoutingPolicy() = default;

    virtual std::string name() const = 0;
    virtual void on_topology(const TopologySnapshot& /*snapshot*/) {}
    // Next node for the head-of-line packet at `node`; nullopt means the packet
    // cannot progress (stuck).
    virtual std::optional<NodeId> next_hop(const NetworkView& view, NodeId node, const PacketView& packet) = 0;
    // Returns the agent whose training step should be scheduled, if any.
    virtual std::optional<int> on_hop(const NetworkView& /*view*/, const HopFeedback& /*feedback*/) {
        return std::nullopt;
    }
    virtual void train_step(int /*agent*/) {}
};

} // namespace leosim
