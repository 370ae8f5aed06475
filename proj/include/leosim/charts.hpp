#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace leosim {

// One row of packets.csv, as the charts need it.
struct PacketRow {
    long long id = 0;
    int src = 0;
    int dst = 0;
    double created_s = 0.0;
    double delivered_s = -1.0; // < 0 when not delivered
    int hops = 0;
    double queue_s = 0.0;
    double tx_s = 0.0;
    double prop_s = 0.0;
    std::string status;

    bool delivered() const { return status == "delivered"; }
    double e2e_s() const { return delivered_s - created_s; }
};

// Streams packets.csv without holding it in memory. Throws LoadError on a
// malformed row.
void for_each_packet(const std::filesystem::path& path, const std::function<void(const PacketRow&)>& fn);

// Five-number summary used by the box plots.
struct BoxStats {
    std::size_t count = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean = 0.0;
};
BoxStats box_stats(std::vector<double> values);

struct ChartReport {
    std::vector<std::string> written;             // file names
    std::map<std::string, std::string> failures;  // chart -> reason
};

// Renders map, congestion, rewards, latency_epsilon, latency_time and
// latency_box SVGs from the artifacts in `run_dir`. A missing input only
// skips the charts that need it.
ChartReport render_charts(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                          const std::string& label = "");

// Time-binned mean delivered latency for each run, written to
// out_dir/compare.csv with overlay and box-plot charts. Runs must share the
// scenario fingerprint; otherwise ConfigError lists the differing fields.
struct CompareBin {
    double start_s = 0.0;
    std::vector<double> mean_e2e_s; // per run; NaN for an empty bin
    std::vector<std::size_t> count;
};
std::vector<CompareBin> compare_runs(const std::vector<std::filesystem::path>& runs,
                                     const std::filesystem::path& out_dir, double bin_s);

} // namespace leosim
