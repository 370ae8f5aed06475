#pragma once

#include "leosim/topology.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace leosim {

struct RadioParams {
    double eirp_dbw = 0.0;
    double gain_over_temp_dbk = 0.0;
    double carrier_hz = 1.0;
    double bandwidth_hz = 1.0;

    void validate(const std::string& field) const;
};

struct ModcodRow {
    std::string name;
    double min_snr_db = 0.0;
    double spectral_efficiency = 0.0; // bits/s/Hz
};

// Rows strictly increasing in both threshold and efficiency.
class ModcodTable {
public:
    explicit ModcodTable(std::vector<ModcodRow> rows);

    // CSV header: name,min_snr_db,spectral_efficiency
    static ModcodTable load_csv(const std::filesystem::path& path);

    const std::vector<ModcodRow>& rows() const { return rows_; }
    // Highest row with min_snr <= snr, or nullptr below the lowest threshold.
    const ModcodRow* select(double snr_db) const;
    double max_spectral_efficiency() const { return rows_.back().spectral_efficiency; }

private:
    std::vector<ModcodRow> rows_;
};

double free_space_path_loss_db(double distance_m, double carrier_hz);
double snr_db(double distance_m, const RadioParams& params);
double data_rate(double snr_db, const ModcodTable& table, double bandwidth_hz);
double propagation_time(double distance_m);
// Throws DeadLinkError for a zero rate.
double transmission_time(double packet_bits, double rate_bps);

struct LinkBudget {
    RadioParams isl;
    RadioParams gsl_up;
    RadioParams gsl_down;
    ModcodTable modcod;

    double rate(double distance_m, const RadioParams& params) const {
        return data_rate(snr_db(distance_m, params), modcod, params.bandwidth_hz);
    }
    // Upper bound of any link rate; used to normalise features.
    double max_rate() const;
};

// Defaults for the radio parameters: Ka-band ISL and GSL.
RadioParams default_isl_radio();
RadioParams default_gsl_up_radio();
RadioParams default_gsl_down_radio();

// Fills every edge rate from its geometry. GSL: gateway->satellite uses the
// uplink params, satellite->gateway the downlink params.
void assign_rates(TopologySnapshot& snapshot, const LinkBudget& budget);

} // namespace leosim
