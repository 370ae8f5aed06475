#include "leosim/channel.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace leosim {

void RadioParams::validate(const std::string& field) const {
    if (!(bandwidth_hz > 0.0) || !std::isfinite(bandwidth_hz)) {
        throw ConfigError(field + ".bandwidth_hz", "must be > 0");
    }
    if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz)) {
        throw ConfigError(field + ".carrier_hz", "must be > 0");
    }
    if (!std::isfinite(eirp_dbw)) {
        throw ConfigError(field + ".eirp_dbw", "must be finite");
    }
    if (!std::isfinite(gain_over_temp_dbk)) {
        throw ConfigError(field + ".gain_over_temp_dbk", "must be finite");
    }
}

ModcodTable::ModcodTable(std::vector<ModcodRow> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) {
        throw ConfigError("modcod", "table is empty");
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (!std::isfinite(rows_[i].min_snr_db) || !(rows_[i].spectral_efficiency > 0.0)) {
            throw ConfigError("modcod", "row '" + rows_[i].name + "' has invalid values");
        }
        if (i > 0 && !(rows_[i].min_snr_db > rows_[i - 1].min_snr_db &&
                       rows_[i].spectral_efficiency > rows_[i - 1].spectral_efficiency)) {
            throw ConfigError("modcod", "rows must be strictly increasing (row '" + rows_[i].name + "')");
        }
    }
}

ModcodTable ModcodTable::load_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const auto name = t.column("name");
    const auto snr = t.column("min_snr_db");
    const auto eff = t.column("spectral_efficiency");
    std::vector<ModcodRow> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        rows.push_back({t.rows[r][name], t.number(r, snr), t.number(r, eff)});
    }
    return ModcodTable(std::move(rows));
}

const ModcodRow* ModcodTable::select(double snr) const {
    // Inclusive threshold: a row applies when min_snr <= snr.
    auto it = std::upper_bound(rows_.begin(), rows_.end(), snr,
                               [](double v, const ModcodRow& row) { return v < row.min_snr_db; });
    if (it == rows_.begin()) {
        return nullptr;
    }
    return &*std::prev(it);
}

double free_space_path_loss_db(double distance_m, double carrier_hz) {
    return 20.0 * std::log10(4.0 * kPi * distance_m * carrier_hz / kSpeedOfLight);
}

double snr_db(double distance_m, const RadioParams& p) {
    if (!(distance_m > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return p.eirp_dbw + p.gain_over_temp_dbk - free_space_path_loss_db(distance_m, p.carrier_hz) -
           10.0 * std::log10(kBoltzmann * p.bandwidth_hz);
}

double data_rate(double snr, const ModcodTable& table, double bandwidth_hz) {
    const ModcodRow* row = table.select(snr);
    return row ? bandwidth_hz * row->spectral_efficiency : 0.0;
}

double propagation_time(double distance_m) {
    return distance_m / kSpeedOfLight;
}

double transmission_time(double packet_bits, double rate_bps) {
    if (!(rate_bps > 0.0)) {
        throw DeadLinkError("transmission over a zero-rate link");
    }
    return packet_bits / rate_bps;
}

double LinkBudget::max_rate() const {
    const double bw = std::max({isl.bandwidth_hz, gsl_up.bandwidth_hz, gsl_down.bandwidth_hz});
    return bw * modcod.max_spectral_efficiency();
}

// Calibrated so that Kepler nearest-neighbour ISLs (2181 km intra-plane,
// ~3100 km inter-plane at the equator) select mid-table MODCODs and a GSL at
// the 10 degree mask of the highest preset still closes.
RadioParams default_isl_radio() {
    return {35.0, 20.0, 26e9, 500e6};
}

RadioParams default_gsl_up_radio() {
    return {40.0, 8.0, 30e9, 250e6};
}

RadioParams default_gsl_down_radio() {
    return {30.0, 15.0, 20e9, 250e6};
}

void assign_rates(TopologySnapshot& snapshot, const LinkBudget& budget) {
    const auto& edges = snapshot.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.kind == LinkKind::gsl) {
            // a: satellite, b: gateway
            const bool a_is_sat = !snapshot.is_gateway(e.a);
            const double down = budget.rate(e.distance_m, budget.gsl_down);
            const double up = budget.rate(e.distance_m, budget.gsl_up);
            snapshot.set_rates(i, a_is_sat ? down : up, a_is_sat ? up : down);
        } else {
            const double r = budget.rate(e.distance_m, budget.isl);
            snapshot.set_rates(i, r, r);
        }
    }
}

} // namespace leosim
