#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>

namespace leosim {

inline constexpr double kEarthRadius = 6'371'000.0;        // m, spherical Earth
inline constexpr double kEarthMu = 3.986004418e14;         // m^3/s^2
inline constexpr double kEarthRotationRate = 7.2921159e-5; // rad/s
inline constexpr double kSpeedOfLight = 299'792'458.0;     // m/s
inline constexpr double kBoltzmann = 1.380649e-23;         // J/K
inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Simulation clock value. Integer picoseconds so that event ordering and
// latency sums are exact.
class SimTime {
public:
    static constexpr std::int64_t kTicksPerSecond = 1'000'000'000'000;

    constexpr SimTime() = default;

    static constexpr SimTime from_ticks(std::int64_t ticks) { return SimTime(ticks); }
    static SimTime from_seconds(double seconds) {
        return SimTime(static_cast<std::int64_t>(std::llround(seconds * kTicksPerSecond)));
    }
    // Durations of physical processes are never rounded down to zero.
    static SimTime duration_from_seconds(double seconds) {
        auto t = from_seconds(seconds);
        return t.ticks_ < 1 ? SimTime(1) : t;
    }

    constexpr std::int64_t ticks() const { return ticks_; }
    constexpr double seconds() const { return static_cast<double>(ticks_) / kTicksPerSecond; }

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(SimTime o) const { return SimTime(ticks_ + o.ticks_); }
    constexpr SimTime operator-(SimTime o) const { return SimTime(ticks_ - o.ticks_); }
    constexpr SimTime& operator+=(SimTime o) {
        ticks_ += o.ticks_;
        return *this;
    }

private:
    constexpr explicit SimTime(std::int64_t ticks) : ticks_(ticks) {}
    std::int64_t ticks_ = 0;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    constexpr bool operator==(const Vec3&) const = default;
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

} // namespace leosim
