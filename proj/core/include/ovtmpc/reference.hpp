#pragma once

#include <span>
#include <string>
#include <vector>

#include "ovtmpc/vehicle_model.hpp"

namespace ovt {

struct Waypoint {
  double x = 0.0;  // [m]
  double y = 0.0;  // [m]
};

// Full reference state recovered from a waypoint sequence. Speeds are the
// body-frame displacement between consecutive waypoints divided by ts, so the
// entry at index k describes the incoming segment (k-1 -> k).
struct ReferenceState {
  double x = 0.0;
  double y = 0.0;
  double v_lon = 0.0;
  double v_lat = 0.0;
  double yaw = 0.0;       // wrapped to (-pi, pi]
  double yaw_rate = 0.0;

  Vec6 vec() const {
    Vec6 z;
    z << x, y, v_lon, v_lat, yaw, yaw_rate;
    return z;
  }
};

// Piecewise-linear speed target over arc length; used to space waypoints.
struct SpeedPoint {
  double s = 0.0;  // arc length [m]
  double v = 0.0;  // target speed [m/s]
};

struct RoadSpec {
  double amplitude = 0.0;   // sine amplitude [m]
  double wavelength = 1.0;  // sine wavelength [m]
  double length = 0.0;      // total arc length to generate [m]
  std::vector<SpeedPoint> speed_profile;
  double ts = 0.05;         // sampling interval [s]
  double r1 = 1.0;          // road width right of the reference [m]
  double r2 = 4.0;          // road width left of the reference [m]
};

// Maps any angle to (-pi, pi].
double wrap_angle(double a);

// Four-quadrant heading of the travel direction from prev to curr. Throws
// CoincidentWaypoints when the two points coincide.
double heading_ref(const Waypoint& prev, const Waypoint& curr);

// Recovers (v_lon, v_lat, yaw, yaw_rate) references from raw waypoints spaced
// ts apart in time. The first element copies the second's derived quantities;
// yaw_rate needs two headings, so index 1 copies index 2's.
std::vector<ReferenceState> full_reference(std::span<const Waypoint> waypoints,
                                           double ts);

// Samples Y = amplitude * sin(2 pi X / wavelength) at arc spacing v(s) * ts,
// starting at the origin, until the requested arc length is covered.
std::vector<Waypoint> generate_sine_road(const RoadSpec& spec);

// Speed profile lookup with end clamping.
double profile_speed(const std::vector<SpeedPoint>& profile, double s);

std::vector<Waypoint> load_waypoints_csv(const std::string& path);
void save_waypoints_csv(const std::string& path,
                        std::span<const Waypoint> waypoints);

}  // namespace ovt
