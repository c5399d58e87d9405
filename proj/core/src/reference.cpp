#include "ovtmpc/reference.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ovt {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

double heading_ref(const Waypoint& prev, const Waypoint& curr) {
  const double dx = curr.x - prev.x;
  const double dy = curr.y - prev.y;
  if (dx * dx + dy * dy < 1e-24) throw CoincidentWaypoints(0);
  return std::atan2(dy, dx);
}

std::vector<ReferenceState> full_reference(std::span<const Waypoint> waypoints,
                                           double ts) {
  if (waypoints.size() < 2) throw TooFewWaypoints(waypoints.size());
  if (!(ts > 0.0)) throw InvalidSpec("sampling interval must be positive");

  const std::size_t n = waypoints.size();
  std::vector<ReferenceState> refs(n);
  for (std::size_t k = 0; k < n; ++k) {
    refs[k].x = waypoints[k].x;
    refs[k].y = waypoints[k].y;
  }

  for (std::size_t k = 1; k < n; ++k) {
    const double dx = waypoints[k].x - waypoints[k - 1].x;
    const double dy = waypoints[k].y - waypoints[k - 1].y;
    if (dx * dx + dy * dy < 1e-24) throw CoincidentWaypoints(k - 1);
    const double psi = std::atan2(dy, dx);
    // body-frame displacement over the incoming segment
    const double bx = std::cos(psi) * dx + std::sin(psi) * dy;
    const double by = -std::sin(psi) * dx + std::cos(psi) * dy;
    refs[k].yaw = psi;
    refs[k].v_lon = bx / ts;
    refs[k].v_lat = by / ts;
    if (refs[k].v_lon < kMinLonSpeed) throw DegenerateSpeed(refs[k].v_lon);
  }
  for (std::size_t k = 2; k < n; ++k) {
    refs[k].yaw_rate = wrap_angle(refs[k].yaw - refs[k - 1].yaw) / ts;
  }
  if (n >= 3) refs[1].yaw_rate = refs[2].yaw_rate;

  refs[0].v_lon = refs[1].v_lon;
  refs[0].v_lat = refs[1].v_lat;
  refs[0].yaw = refs[1].yaw;
  refs[0].yaw_rate = refs[1].yaw_rate;
  return refs;
}

double profile_speed(const std::vector<SpeedPoint>& profile, double s) {
  if (profile.empty()) throw InvalidSpec("speed profile is empty");
  if (s <= profile.front().s) return profile.front().v;
  if (s >= profile.back().s) return profile.back().v;
  for (std::size_t i = 1; i < profile.size(); ++i) {
    if (s <= profile[i].s) {
      const double t =
          (s - profile[i - 1].s) / (profile[i].s - profile[i - 1].s);
      return profile[i - 1].v + t * (profile[i].v - profile[i - 1].v);
    }
  }
  return profile.back().v;
}

std::vector<Waypoint> generate_sine_road(const RoadSpec& spec) {
  if (!(spec.wavelength > 0.0)) throw InvalidSpec("wavelength must be positive");
  if (!(spec.length > 0.0)) throw InvalidSpec("road length must be positive");
  if (!(spec.ts > 0.0)) throw InvalidSpec("sampling interval must be positive");
  if (spec.speed_profile.empty()) throw InvalidSpec("speed profile is empty");
  for (std::size_t i = 1; i < spec.speed_profile.size(); ++i) {
    if (spec.speed_profile[i].s <= spec.speed_profile[i - 1].s)
      throw InvalidSpec("speed profile arc positions must be increasing");
  }
  for (const auto& sp : spec.speed_profile) {
    if (sp.v < kMinLonSpeed)
      throw InvalidSpec("speed profile targets must stay at or above 1 m/s");
  }

  const double k = kTwoPi / spec.wavelength;
  // dX/ds for unit-speed traversal of the curve (arc-length parameterization)
  const auto dxds = [&](double x) {
    const double slope = spec.amplitude * k * std::cos(k * x);
    return 1.0 / std::sqrt(1.0 + slope * slope);
  };

  std::vector<Waypoint> wps;
  wps.push_back({0.0, 0.0});
  double s = 0.0;
  double x = 0.0;
  while (s < spec.length) {
    const double ds = profile_speed(spec.speed_profile, s) * spec.ts;
    // RK4 on dX/ds keeps the spacing error far below the waypoint scale
    const int sub = 4;
    const double h = ds / sub;
    for (int i = 0; i < sub; ++i) {
      const double k1 = dxds(x);
      const double k2 = dxds(x + 0.5 * h * k1);
      const double k3 = dxds(x + 0.5 * h * k2);
      const double k4 = dxds(x + h * k3);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    s += ds;
    wps.push_back({x, spec.amplitude * std::sin(k * x)});
  }
  return wps;
}

std::vector<Waypoint> load_waypoints_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open waypoint file: " + path);
  std::vector<Waypoint> wps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    // allow a single header row
    if (lineno == 1 && line.find_first_not_of("xyXY, \t\r") == std::string::npos)
      continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b))
      throw ScenarioError(path + ":" + std::to_string(lineno) +
                          ": expected two comma-separated columns");
    try {
      wps.push_back({std::stod(a), std::stod(b)});
    } catch (const std::exception&) {
      throw ScenarioError(path + ":" + std::to_string(lineno) +
                          ": malformed number");
    }
  }
  return wps;
}

void save_waypoints_csv(const std::string& path,
                        std::span<const Waypoint> waypoints) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write waypoint file: " + path);
  out << "x,y\n";
  out.precision(12);
  for (const auto& w : waypoints) out << w.x << "," << w.y << "\n";
}

}  // namespace ovt
