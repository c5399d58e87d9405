#include "ovtmpc/scenario_json.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ovtmpc/errors.hpp"

namespace ovt {
namespace {

using nlohmann::json;

void expect_keys(const json& obj, const std::string& section,
                 std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ScenarioError("unknown key \"" + key + "\" in " + section);
    }
  }
}

double get_num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    throw ScenarioError(std::string("\"") + key + "\" must be a number");
  }
  return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ScenarioError(std::string("\"") + key + "\" must be an integer");
  }
  return v.get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    throw ScenarioError(std::string("\"") + key + "\" must be a boolean");
  }
  return v.get<bool>();
}

template <typename Vec>
void get_vec(const json& obj, const char* key, Vec& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != static_cast<std::size_t>(out.size())) {
    throw ScenarioError(std::string("\"") + key + "\" must be an array of " +
                        std::to_string(out.size()) + " numbers");
  }
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!v[i].is_number()) {
      throw ScenarioError(std::string("\"") + key + "\" must contain numbers");
    }
    out(i) = v[i].get<double>();
  }
}

void parse_road(const json& obj, Scenario& s, const std::string& base_dir) {
  expect_keys(obj, "road",
              {"amplitude", "wavelength", "length", "speed_profile",
               "waypoints_csv", "waypoints"});
  const bool has_sine = obj.contains("amplitude") || obj.contains("wavelength") ||
                        obj.contains("length") || obj.contains("speed_profile");
  const bool has_csv = obj.contains("waypoints_csv");
  const bool has_inline = obj.contains("waypoints");
  if ((has_sine ? 1 : 0) + (has_csv ? 1 : 0) + (has_inline ? 1 : 0) > 1) {
    throw ScenarioError(
        "road must use exactly one of the sine parameters, waypoints_csv, or "
        "waypoints");
  }
  if (has_csv) {
    const json& v = obj.at("waypoints_csv");
    if (!v.is_string()) {
      throw ScenarioError("\"waypoints_csv\" must be a string");
    }
    std::filesystem::path p(v.get<std::string>());
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    s.waypoints = load_waypoints_csv(p.string());
    return;
  }
  if (has_inline) {
    const json& v = obj.at("waypoints");
    if (!v.is_array()) throw ScenarioError("\"waypoints\" must be an array");
    s.waypoints.clear();
    for (const json& wp : v) {
      if (!wp.is_array() || wp.size() != 2 || !wp[0].is_number() ||
          !wp[1].is_number()) {
        throw ScenarioError("each waypoint must be a [x, y] pair");
      }
      s.waypoints.push_back({wp[0].get<double>(), wp[1].get<double>()});
    }
    return;
  }
  s.road.amplitude = get_num(obj, "amplitude", s.road.amplitude);
  s.road.wavelength = get_num(obj, "wavelength", s.road.wavelength);
  s.road.length = get_num(obj, "length", s.road.length);
  if (obj.contains("speed_profile")) {
    const json& v = obj.at("speed_profile");
    if (!v.is_array() || v.empty()) {
      throw ScenarioError("\"speed_profile\" must be a non-empty array");
    }
    s.road.speed_profile.clear();
    for (const json& pt : v) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() ||
          !pt[1].is_number()) {
        throw ScenarioError("each speed profile entry must be a [s, v] pair");
      }
      s.road.speed_profile.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
  }
}

void parse_vehicle(const json& obj, VehicleParams& vp) {
  expect_keys(obj, "vehicle",
              {"mass", "i_z", "l_f", "l_r", "c_alpha_f", "c_alpha_r"});
  vp.mass = get_num(obj, "mass", vp.mass);
  vp.i_z = get_num(obj, "i_z", vp.i_z);
  vp.l_f = get_num(obj, "l_f", vp.l_f);
  vp.l_r = get_num(obj, "l_r", vp.l_r);
  vp.c_alpha_f = get_num(obj, "c_alpha_f", vp.c_alpha_f);
  vp.c_alpha_r = get_num(obj, "c_alpha_r", vp.c_alpha_r);
  if (vp.mass <= 0.0 || vp.i_z <= 0.0 || vp.l_f <= 0.0 || vp.l_r <= 0.0) {
    throw ScenarioError("vehicle mass, inertia, and axle distances must be > 0");
  }
}

void parse_mpc(const json& obj, MpcConfig& cfg) {
  expect_keys(obj, "mpc",
              {"horizon", "ts", "q_diag", "p_diag", "r_diag", "state_lo",
               "state_hi", "steer_max", "accel_min", "accel_max",
               "steer_rate_max", "accel_rate_max", "road_r1", "road_r2",
               "soft_penalty", "qp_tol", "qp_max_iter"});
  const int horizon = get_int(obj, "horizon", cfg.horizon);
  const double ts = get_num(obj, "ts", cfg.ts);
  if (horizon < 1) throw ScenarioError("\"horizon\" must be >= 1");
  if (ts <= 0.0) throw ScenarioError("\"ts\" must be > 0");
  cfg = MpcConfig::with_ts(ts);  // re-derive the ts-coupled yaw-rate bound
  cfg.horizon = horizon;
  get_vec(obj, "q_diag", cfg.q_diag);
  get_vec(obj, "p_diag", cfg.p_diag);
  get_vec(obj, "r_diag", cfg.r_diag);
  get_vec(obj, "state_lo", cfg.state_lo);
  get_vec(obj, "state_hi", cfg.state_hi);
  cfg.steer_max = get_num(obj, "steer_max", cfg.steer_max);
  cfg.accel_min = get_num(obj, "accel_min", cfg.accel_min);
  cfg.accel_max = get_num(obj, "accel_max", cfg.accel_max);
  cfg.steer_rate_max = get_num(obj, "steer_rate_max", cfg.steer_rate_max);
  cfg.accel_rate_max = get_num(obj, "accel_rate_max", cfg.accel_rate_max);
  cfg.road_r1 = get_num(obj, "road_r1", cfg.road_r1);
  cfg.road_r2 = get_num(obj, "road_r2", cfg.road_r2);
  cfg.soft_penalty = get_num(obj, "soft_penalty", cfg.soft_penalty);
  cfg.qp_tol = get_num(obj, "qp_tol", cfg.qp_tol);
  cfg.qp_max_iter = get_int(obj, "qp_max_iter", cfg.qp_max_iter);
}

void parse_obstacle(const json& obj, Scenario& s) {
  if (obj.is_null()) return;
  expect_keys(obj, "obstacle", {"x", "y", "radius", "margin"});
  ObstacleCircle o;
  o.cx = get_num(obj, "x", 0.0);
  o.cy = get_num(obj, "y", 0.0);
  o.radius = get_num(obj, "radius", 1.0);
  o.margin = get_num(obj, "margin", 0.25);
  s.obstacles = {o};
}

void parse_run(const json& obj, Scenario& s) {
  expect_keys(obj, "run",
              {"duration_steps", "substeps", "initial_state",
               "align_initial_yaw", "sqp"});
  s.duration_steps = get_int(obj, "duration_steps", s.duration_steps);
  s.plant_substeps = get_int(obj, "substeps", s.plant_substeps);
  s.align_initial_yaw = get_bool(obj, "align_initial_yaw", s.align_initial_yaw);
  if (obj.contains("initial_state")) {
    const json& st = obj.at("initial_state");
    expect_keys(st, "run.initial_state",
                {"x", "y", "v_lon", "v_lat", "yaw", "yaw_rate"});
    s.initial_state.x = get_num(st, "x", s.initial_state.x);
    s.initial_state.y = get_num(st, "y", s.initial_state.y);
    s.initial_state.v_lon = get_num(st, "v_lon", s.initial_state.v_lon);
    s.initial_state.v_lat = get_num(st, "v_lat", s.initial_state.v_lat);
    s.initial_state.yaw = get_num(st, "yaw", s.initial_state.yaw);
    s.initial_state.yaw_rate = get_num(st, "yaw_rate", s.initial_state.yaw_rate);
  }
  if (obj.contains("sqp")) {
    const json& sq = obj.at("sqp");
    expect_keys(sq, "run.sqp",
                {"max_iterations", "tol_step", "tol_feas", "warm_start",
                 "trust_radius"});
    s.sqp.max_iterations = get_int(sq, "max_iterations", s.sqp.max_iterations);
    s.sqp.tol_step = get_num(sq, "tol_step", s.sqp.tol_step);
    s.sqp.tol_feas = get_num(sq, "tol_feas", s.sqp.tol_feas);
    s.sqp.warm_start = get_bool(sq, "warm_start", s.sqp.warm_start);
    s.sqp.trust_radius = get_num(sq, "trust_radius", s.sqp.trust_radius);
  }
}

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

Scenario parse_scenario_json(const std::string& text,
                             const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ScenarioError("scenario root must be an object");
  expect_keys(doc, "scenario",
              {"name", "road", "vehicle", "mpc", "obstacle", "run"});

  Scenario s;
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) {
      throw ScenarioError("\"name\" must be a string");
    }
    s.name = doc.at("name").get<std::string>();
  }
  // mpc first: the road generator and reference builder share its sampling time
  if (doc.contains("mpc")) parse_mpc(doc.at("mpc"), s.mpc);
  s.road.ts = s.mpc.ts;
  s.road.r1 = s.mpc.road_r1;
  s.road.r2 = s.mpc.road_r2;
  if (doc.contains("road")) parse_road(doc.at("road"), s, base_dir);
  if (doc.contains("vehicle")) parse_vehicle(doc.at("vehicle"), s.vehicle);
  if (doc.contains("obstacle")) parse_obstacle(doc.at("obstacle"), s);
  if (doc.contains("run")) parse_run(doc.at("run"), s);
  validate_scenario(s);
  return s;
}

Scenario load_scenario_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_json(buf.str(),
                             std::filesystem::path(path).parent_path().string());
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  if (s.waypoints.empty()) {
    json prof = json::array();
    for (const SpeedPoint& p : s.road.speed_profile) {
      prof.push_back({p.s, p.v});
    }
    doc["road"] = {{"amplitude", s.road.amplitude},
                   {"wavelength", s.road.wavelength},
                   {"length", s.road.length},
                   {"speed_profile", prof}};
  } else {
    json wps = json::array();
    for (const Waypoint& w : s.waypoints) wps.push_back({w.x, w.y});
    doc["road"] = {{"waypoints", wps}};
  }
  doc["vehicle"] = {{"mass", s.vehicle.mass},
                    {"i_z", s.vehicle.i_z},
                    {"l_f", s.vehicle.l_f},
                    {"l_r", s.vehicle.l_r},
                    {"c_alpha_f", s.vehicle.c_alpha_f},
                    {"c_alpha_r", s.vehicle.c_alpha_r}};
  doc["mpc"] = {{"horizon", s.mpc.horizon},
                {"ts", s.mpc.ts},
                {"q_diag", vec_to_json(s.mpc.q_diag)},
                {"p_diag", vec_to_json(s.mpc.p_diag)},
                {"r_diag", vec_to_json(s.mpc.r_diag)},
                {"state_lo", vec_to_json(s.mpc.state_lo)},
                {"state_hi", vec_to_json(s.mpc.state_hi)},
                {"steer_max", s.mpc.steer_max},
                {"accel_min", s.mpc.accel_min},
                {"accel_max", s.mpc.accel_max},
                {"steer_rate_max", s.mpc.steer_rate_max},
                {"accel_rate_max", s.mpc.accel_rate_max},
                {"road_r1", s.mpc.road_r1},
                {"road_r2", s.mpc.road_r2},
                {"soft_penalty", s.mpc.soft_penalty},
                {"qp_tol", s.mpc.qp_tol},
                {"qp_max_iter", s.mpc.qp_max_iter}};
  if (!s.obstacles.empty()) {
    const ObstacleCircle& o = s.obstacles.front();
    doc["obstacle"] = {
        {"x", o.cx}, {"y", o.cy}, {"radius", o.radius}, {"margin", o.margin}};
  }
  doc["run"] = {{"duration_steps", s.duration_steps},
                {"substeps", s.plant_substeps},
                {"align_initial_yaw", s.align_initial_yaw},
                {"initial_state",
                 {{"x", s.initial_state.x},
                  {"y", s.initial_state.y},
                  {"v_lon", s.initial_state.v_lon},
                  {"v_lat", s.initial_state.v_lat},
                  {"yaw", s.initial_state.yaw},
                  {"yaw_rate", s.initial_state.yaw_rate}}},
                {"sqp",
                 {{"max_iterations", s.sqp.max_iterations},
                  {"tol_step", s.sqp.tol_step},
                  {"tol_feas", s.sqp.tol_feas},
                  {"warm_start", s.sqp.warm_start},
                  {"trust_radius", s.sqp.trust_radius}}}};
  return doc.dump(2) + "\n";
}

}  // namespace ovt
