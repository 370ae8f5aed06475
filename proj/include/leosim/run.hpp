#pragma once

#include "leosim/config.hpp"
#include "leosim/engine.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace leosim {

inline constexpr std::string_view kVersion = "0.1.0";

// Sums over delivered packets, in exact clock ticks.
struct LatencyTotals {
    std::uint64_t delivered = 0;
    std::int64_t e2e_ticks = 0;
    std::int64_t queue_ticks = 0;
    std::int64_t tx_ticks = 0;
    std::int64_t prop_ticks = 0;

    void add(const Packet& p);
    double mean_e2e_s() const;
    double mean_queue_s() const;
    double mean_tx_s() const;
    double mean_prop_s() const;
};

struct RunSummary {
    std::filesystem::path output_dir;
    AuditCounts counts;
    LatencyTotals latency;
    int rebuilds = 0;
    std::uint64_t fifo_violations = 0;
    std::uint64_t queue_bound_violations = 0;
    std::uint64_t invariant_violations = 0; // summed over every snapshot
    std::uint64_t trace_hash = 0;
    std::uint64_t events = 0;
    std::vector<std::string> files; // relative to output_dir, manifest order
};

// Builds the topology provider, policy and traffic for `config`, runs the
// engine to the configured duration and writes every artifact into
// config.output_dir, finishing with manifest.json.
RunSummary run_scenario(const ScenarioConfig& config);

std::vector<GatewaySite> load_active_gateways(const ScenarioConfig& config);
LinkBudget make_link_budget(const ScenarioConfig& config);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Columns of packets.csv; the first line of the file is a versioned comment.
inline constexpr std::string_view kPacketsHeader =
    "packet_id,src,dst,created_at,delivered_at,hops,queue_s,tx_s,prop_s,status";

} // namespace leosim
