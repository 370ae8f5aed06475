#include "leosim/orbit.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <array>
#include <cmath>

namespace leosim {

std::string_view to_string(WalkerKind kind) {
    return kind == WalkerKind::star ? "star" : "delta";
}

WalkerKind parse_walker_kind(std::string_view text) {
    if (text == "star") {
        return WalkerKind::star;
    }
    if (text == "delta") {
        return WalkerKind::delta;
    }
    throw ConfigError("walker_kind", "expected 'star' or 'delta', got '" + std::string(text) + "'");
}

void ConstellationSpec::validate() const {
    if (num_planes < 1) {
        throw ConfigError("num_planes", "must be >= 1");
    }
    if (sats_per_plane < 1) {
        throw ConfigError("sats_per_plane", "must be >= 1");
    }
    if (!(altitude_m > 0.0) || !std::isfinite(altitude_m)) {
        throw ConfigError("altitude", "must be > 0");
    }
    if (!(inclination_rad >= 0.0 && inclination_rad <= kPi)) {
        throw ConfigError("inclination", "must be within [0, 180] degrees");
    }
    if (phasing_offset_rad && !std::isfinite(*phasing_offset_rad)) {
        throw ConfigError("phasing_offset", "must be finite");
    }
}

double ConstellationSpec::phasing() const {
    if (phasing_offset_rad) {
        return *phasing_offset_rad;
    }
    return walker == WalkerKind::star ? 0.0 : kPi / (num_planes * sats_per_plane);
}

double ConstellationSpec::raan_spacing() const {
    return (walker == WalkerKind::star ? kPi : 2.0 * kPi) / num_planes;
}

namespace {

struct Preset {
    std::string_view name;
    int planes;
    int per_plane;
    double altitude_km;
    double inclination_deg;
    WalkerKind walker;
};

// Inclinations are public nominal values, not part of the plane/altitude data.
constexpr std::array<Preset, 4> kPresets{{
    {"kepler", 7, 20, 600.0, 98.6, WalkerKind::star},
    {"iridium-next", 6, 11, 780.0, 86.4, WalkerKind::star},
    {"oneweb", 36, 18, 1200.0, 87.9, WalkerKind::star},
    {"starlink", 72, 22, 550.0, 53.0, WalkerKind::delta},
}};

} // namespace

ConstellationSpec constellation_preset(std::string_view name) {
    for (const auto& p : kPresets) {
        if (p.name == name) {
            ConstellationSpec spec;
            spec.name = std::string(p.name);
            spec.num_planes = p.planes;
            spec.sats_per_plane = p.per_plane;
            spec.altitude_m = p.altitude_km * 1e3;
            spec.inclination_rad = deg_to_rad(p.inclination_deg);
            spec.walker = p.walker;
            return spec;
        }
    }
    throw ConfigError("constellation.preset", "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string_view> constellation_preset_names() {
    std::vector<std::string_view> names;
    for (const auto& p : kPresets) {
        names.push_back(p.name);
    }
    return names;
}

Vec3 CircularOrbit::position_at(double epoch_s) const {
    const double u = argument_of_latitude(epoch_s);
    const double cu = std::cos(u), su = std::sin(u);
    const double co = std::cos(raan_rad), so = std::sin(raan_rad);
    const double ci = std::cos(inclination_rad), si = std::sin(inclination_rad);
    const double x = radius_m * (co * cu - so * su * ci);
    const double y = radius_m * (so * cu + co * su * ci);
    const double z = radius_m * (su * si);
    // Inertial -> Earth-fixed: rotate by -theta about z.
    const double theta = earth_rotation_rad_s * epoch_s;
    const double ct = std::cos(theta), st = std::sin(theta);
    return {x * ct + y * st, -x * st + y * ct, z};
}

double orbital_period(double altitude_m) {
    const double a = kEarthRadius + altitude_m;
    return 2.0 * kPi * std::sqrt(a * a * a / kEarthMu);
}

std::vector<SatelliteState> build_constellation(const ConstellationSpec& spec, double earth_rotation_rad_s) {
    spec.validate();
    const double radius = kEarthRadius + spec.altitude_m;
    const double mean_motion = 2.0 * kPi / orbital_period(spec.altitude_m);
    const double slot = 2.0 * kPi / spec.sats_per_plane;

    std::vector<SatelliteState> states;
    states.reserve(static_cast<std::size_t>(spec.num_satellites()));
    for (int p = 0; p < spec.num_planes; ++p) {
        for (int k = 0; k < spec.sats_per_plane; ++k) {
            SatelliteState s;
            s.sat_id = {p, k};
            s.orbit.radius_m = radius;
            s.orbit.inclination_rad = spec.inclination_rad;
            s.orbit.raan_rad = p * spec.raan_spacing();
            s.orbit.anomaly_at_zero_rad = k * slot + p * spec.phasing();
            s.orbit.mean_motion_rad_s = mean_motion;
            s.orbit.earth_rotation_rad_s = earth_rotation_rad_s;
            s.epoch_s = 0.0;
            s.position = s.orbit.position_at(0.0);
            states.push_back(s);
        }
    }
    return states;
}

std::vector<SatelliteState> states_at(std::span<const SatelliteState> states, double epoch_s) {
    std::vector<SatelliteState> out(states.begin(), states.end());
    for (auto& s : out) {
        s.epoch_s = epoch_s;
        s.position = s.orbit.position_at(epoch_s);
    }
    return out;
}

std::vector<SatelliteState> propagate(std::span<const SatelliteState> states, double dt_s) {
    std::vector<SatelliteState> out(states.begin(), states.end());
    for (auto& s : out) {
        s.epoch_s += dt_s;
        s.position = s.orbit.position_at(s.epoch_s);
    }
    return out;
}

void GatewaySite::validate() const {
    if (!(std::abs(latitude_rad) <= kPi / 2.0)) {
        throw ConfigError("gateway[" + name + "].latitude", "must be within [-90, 90] degrees");
    }
    if (!(longitude_rad >= -kPi && longitude_rad < kPi)) {
        throw ConfigError("gateway[" + name + "].longitude", "must be within [-180, 180) degrees");
    }
}

Vec3 gateway_position(const GatewaySite& site) {
    const double cl = std::cos(site.latitude_rad);
    return {kEarthRadius * cl * std::cos(site.longitude_rad), kEarthRadius * cl * std::sin(site.longitude_rad),
            kEarthRadius * std::sin(site.latitude_rad)};
}

LatLon to_lat_lon(const Vec3& p) {
    const double r = p.norm();
    if (r == 0.0) {
        return {};
    }
    return {std::asin(p.z / r), std::atan2(p.y, p.x)};
}

std::vector<GatewaySite> load_gateway_sites(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const auto name_col = table.column("name");
    const auto lat_col = table.column("latitude_deg");
    const auto lon_col = table.column("longitude_deg");
    std::vector<GatewaySite> sites;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        GatewaySite site;
        site.gw_id = static_cast<int>(r);
        site.name = table.rows[r][name_col];
        site.latitude_rad = deg_to_rad(table.number(r, lat_col));
        double lon = table.number(r, lon_col);
        if (lon == 180.0) {
            lon = -180.0;
        }
        site.longitude_rad = deg_to_rad(lon);
        site.validate();
        sites.push_back(site);
    }
    return sites;
}

} // namespace leosim
