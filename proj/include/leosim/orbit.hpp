#pragma once

#include "leosim/units.hpp"

#include <compare>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace leosim {

enum class WalkerKind { star, delta };

std::string_view to_string(WalkerKind kind);
WalkerKind parse_walker_kind(std::string_view text);

struct ConstellationSpec {
    std::string name = "custom";
    int num_planes = 1;
    int sats_per_plane = 1;
    double altitude_m = 600e3;
    double inclination_rad = deg_to_rad(90.0);
    WalkerKind walker = WalkerKind::star;
    // Anomaly offset between adjacent planes. Unset means the walker default:
    // 0 for star, pi/(O*N) for delta.
    std::optional<double> phasing_offset_rad;

    // Throws ConfigError naming the offending field.
    void validate() const;

    int num_satellites() const { return num_planes * sats_per_plane; }
    double phasing() const;
    // Ascending-node spacing between adjacent planes: pi/O (star) or 2pi/O (delta).
    double raan_spacing() const;
};

// kepler, iridium-next, oneweb, starlink.
ConstellationSpec constellation_preset(std::string_view name);
std::vector<std::string_view> constellation_preset_names();

struct SatId {
    int plane = 0;
    int index = 0;
    constexpr auto operator<=>(const SatId&) const = default;
};

// Closed-form circular orbit. Positions are a function of absolute
// simulation time only, so propagation never accumulates drift.
struct CircularOrbit {
    double radius_m = kEarthRadius;
    double inclination_rad = 0.0;
    double raan_rad = 0.0;
    double anomaly_at_zero_rad = 0.0;
    double mean_motion_rad_s = 0.0;
    double earth_rotation_rad_s = kEarthRotationRate;

    double argument_of_latitude(double epoch_s) const {
        return anomaly_at_zero_rad + mean_motion_rad_s * epoch_s;
    }
    // Earth-centered, Earth-fixed position at absolute simulation time.
    Vec3 position_at(double epoch_s) const;
};

struct SatelliteState {
    SatId sat_id;
    Vec3 position;       // ECEF, m
    double epoch_s = 0.0;
    CircularOrbit orbit;
};

// Epoch-0 states ordered by (plane, index).
std::vector<SatelliteState> build_constellation(const ConstellationSpec& spec,
                                                double earth_rotation_rad_s = kEarthRotationRate);

double orbital_period(double altitude_m);

std::vector<SatelliteState> propagate(std::span<const SatelliteState> states, double dt_s);

// States of the same constellation at an absolute epoch.
std::vector<SatelliteState> states_at(std::span<const SatelliteState> states, double epoch_s);

struct GatewaySite {
    int gw_id = 0;
    double latitude_rad = 0.0;
    double longitude_rad = 0.0;
    std::string name;

    void validate() const;
};

Vec3 gateway_position(const GatewaySite& site);

// Geodetic (spherical) latitude/longitude of an ECEF position, radians.
struct LatLon {
    double latitude_rad = 0.0;
    double longitude_rad = 0.0;
};
LatLon to_lat_lon(const Vec3& position);

// CSV with header name,latitude_deg,longitude_deg. Ids are assigned in file order.
std::vector<GatewaySite> load_gateway_sites(const std::filesystem::path& path);

} // namespace leosim
