#include "ovtmpc/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <variant>

#include <nlohmann/json.hpp>

#include "ovtmpc/errors.hpp"

namespace ovt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double segment_distance(const Waypoint& a, const Waypoint& b, double x,
                        double y) {
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  const double len2 = ex * ex + ey * ey;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((x - a.x) * ex + (y - a.y) * ey) / len2, 0.0, 1.0);
  }
  return std::hypot(x - (a.x + t * ex), y - (a.y + t * ey));
}

const char* qp_status_name(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIterations: return "max_iterations";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

bool input_within_limits(const ControlInput& u, const ControlInput& u_prev,
                         const MpcConfig& cfg) {
  const double tol = 1e-12;
  return std::abs(u.steer) <= cfg.steer_max + tol &&
         u.accel <= cfg.accel_max + tol && u.accel >= cfg.accel_min - tol &&
         std::abs(u.steer - u_prev.steer) <= cfg.steer_rate_max + tol &&
         std::abs(u.accel - u_prev.accel) <= cfg.accel_rate_max + tol;
}

}  // namespace

const char* controller_name(ControllerKind kind) {
  return kind == ControllerKind::Nmpc ? "nmpc" : "lpvmpc";
}

void validate_scenario(const Scenario& s) {
  if (s.duration_steps < 0) throw ScenarioError("duration_steps is negative");
  if (s.plant_substeps < 1) throw ScenarioError("plant_substeps must be >= 1");
  if (s.obstacles.size() > 1) {
    throw ScenarioError("at most one obstacle is supported");
  }
  for (const ObstacleCircle& o : s.obstacles) {
    if (o.radius <= 0.0) throw ScenarioError("obstacle radius must be > 0");
    if (o.margin < 0.0) throw ScenarioError("obstacle margin must be >= 0");
  }
  if (s.mpc.horizon < 1) throw ScenarioError("mpc horizon must be >= 1");
  if (s.mpc.ts <= 0.0) throw ScenarioError("sampling time must be > 0");
}

ResolvedScenario resolve(const Scenario& s) {
  validate_scenario(s);
  ResolvedScenario rs;
  rs.scenario = s;
  rs.waypoints = s.waypoints.empty() ? generate_sine_road(s.road) : s.waypoints;
  if (rs.waypoints.size() < static_cast<std::size_t>(s.mpc.horizon) + 1) {
    throw ScenarioError("road too short for the prediction horizon");
  }
  rs.refs = full_reference(rs.waypoints, s.mpc.ts);
  if (s.align_initial_yaw) {
    rs.scenario.initial_state.yaw = rs.refs.front().yaw;
  }
  return rs;
}

std::size_t nearest_ref_index(const std::vector<Waypoint>& wps, double x,
                              double y, std::size_t from, std::size_t last) {
  // The vehicle advances about one vertex per control step, so a short
  // forward window is enough; never moving `from` backward keeps the window
  // monotone even when the path loops near itself during the overtake.
  const std::size_t hi = std::min(last, from + 40);
  std::size_t best = from;
  double best_d2 = kInf;
  for (std::size_t i = from; i <= hi; ++i) {
    const double dx = wps[i].x - x;
    const double dy = wps[i].y - y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

double distance_to_polyline(const std::vector<Waypoint>& wps, double x,
                            double y) {
  if (wps.empty()) return kInf;
  if (wps.size() == 1) return std::hypot(x - wps[0].x, y - wps[0].y);
  double best = kInf;
  for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
    best = std::min(best, segment_distance(wps[i], wps[i + 1], x, y));
  }
  return best;
}

RunRecord run(const ResolvedScenario& rs, ControllerKind kind,
              QpDumpHook dump) {
  const Scenario& s = rs.scenario;
  const int n = s.mpc.horizon;
  const std::size_t last_start = rs.refs.size() - 1 - static_cast<std::size_t>(n);
  const std::optional<ObstacleCircle> obstacle =
      s.obstacles.empty() ? std::nullopt
                          : std::optional<ObstacleCircle>(s.obstacles.front());

  RunRecord rec;
  rec.controller = kind;
  rec.steps.reserve(static_cast<std::size_t>(s.duration_steps));

  VehicleState z = s.initial_state;
  rec.final_state = z;
  if (s.duration_steps == 0) {
    rec.metrics.min_clearance = kInf;
    return rec;
  }

  std::variant<LpvMpcController, NmpcController> ctrl_holder =
      kind == ControllerKind::Lpvmpc
          ? std::variant<LpvMpcController, NmpcController>(
                std::in_place_type<LpvMpcController>, s.vehicle, s.mpc)
          : std::variant<LpvMpcController, NmpcController>(
                std::in_place_type<NmpcController>, s.vehicle, s.mpc, s.sqp);
  std::visit([&](auto& c) {
    c.init(z);
    if (dump) c.set_qp_dump_hook(dump);
  }, ctrl_holder);

  std::size_t j = 0;
  ControlInput u_prev{};
  const double sub_ts = s.mpc.ts / s.plant_substeps;

  for (int k = 0; k < s.duration_steps; ++k) {
    j = nearest_ref_index(rs.waypoints, z.x, z.y, j, last_start);
    const std::span<const ReferenceState> window(&rs.refs[j],
                                                 static_cast<std::size_t>(n) + 1);

    ControllerStepResult res;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      res = std::visit(
          [&](auto& c) { return c.step(z, window, obstacle); }, ctrl_holder);
    } catch (const DegenerateSpeed&) {
      res = ControllerStepResult{};
      res.fallback = true;
      res.applied = clamp_input(
          ControlInput{u_prev.steer,
                       std::max(s.mpc.accel_min,
                                u_prev.accel - s.mpc.accel_rate_max)},
          u_prev, s.mpc);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    StepRecord sr;
    sr.step = k;
    sr.state = z;
    sr.input = res.applied;
    sr.solve_time_s = wall;
    sr.iterations = res.iterations;
    sr.qp_status = res.qp_status;
    sr.fallback = res.fallback;
    sr.converged = res.converged;
    sr.lateral_error = lateral_error(z, rs.refs[j]);
    sr.obstacle_distance =
        obstacle ? std::hypot(z.x - obstacle->cx, z.y - obstacle->cy) : kInf;
    sr.objective = res.objective;
    sr.ref_index = j;
    rec.steps.push_back(sr);

    for (int sub = 0; sub < s.plant_substeps; ++sub) {
      z = step_euler(z, res.applied, s.vehicle, sub_ts);
    }
    u_prev = res.applied;
  }

  rec.final_state = z;
  rec.metrics = compute_metrics(rec, rs);
  return rec;
}

Metrics compute_metrics(const RunRecord& rec, const ResolvedScenario& rs) {
  if (rec.steps.empty()) throw EmptyRecord();
  const Scenario& s = rs.scenario;
  Metrics m;
  m.steps = static_cast<int>(rec.steps.size());
  m.min_clearance = kInf;

  // Warm-up exclusion: the first step pays one-time setup costs that say
  // nothing about steady-state solve speed.
  const std::size_t t_begin = rec.steps.size() >= 2 ? 1 : 0;
  double sum = 0.0;
  m.solve_min_s = kInf;
  for (std::size_t i = t_begin; i < rec.steps.size(); ++i) {
    const double t = rec.steps[i].solve_time_s;
    sum += t;
    m.solve_min_s = std::min(m.solve_min_s, t);
    m.solve_max_s = std::max(m.solve_max_s, t);
  }
  m.solve_avg_s = sum / static_cast<double>(rec.steps.size() - t_begin);

  double sq_sum = 0.0;
  std::size_t sq_count = 0;
  ControlInput u_prev{};
  for (const StepRecord& sr : rec.steps) {
    if (sr.step >= 20) {
      const double d = distance_to_polyline(rs.waypoints, sr.state.x, sr.state.y);
      sq_sum += d * d;
      ++sq_count;
    }
    m.max_lateral_left = std::max(m.max_lateral_left, sr.lateral_error);
    m.max_lateral_right = std::max(m.max_lateral_right, -sr.lateral_error);
    if (!s.obstacles.empty()) {
      m.min_clearance = std::min(
          m.min_clearance, sr.obstacle_distance - s.obstacles.front().radius);
    }
    m.fallback_count += sr.fallback ? 1 : 0;

    bool violated = sr.lateral_error < -s.mpc.road_r1 - 0.05 ||
                    sr.lateral_error > s.mpc.road_r2 + 0.05;
    if (!s.obstacles.empty() &&
        sr.obstacle_distance < s.obstacles.front().radius) {
      violated = true;
    }
    if (!input_within_limits(sr.input, u_prev, s.mpc)) violated = true;
    m.violation_count += violated ? 1 : 0;
    u_prev = sr.input;
  }
  if (sq_count > 0) {
    m.position_rmse = std::sqrt(sq_sum / static_cast<double>(sq_count));
  }
  return m;
}

void save_trajectory_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write " + path);
  out.precision(12);
  out << "step,x,y,v_lon,v_lat,yaw,yaw_rate,steer,accel,solve_time_s,"
         "iterations,qp_status,fallback,converged,lateral_error,"
         "obstacle_distance,objective,ref_index\n";
  for (const StepRecord& sr : rec.steps) {
    out << sr.step << ',' << sr.state.x << ',' << sr.state.y << ','
        << sr.state.v_lon << ',' << sr.state.v_lat << ',' << sr.state.yaw
        << ',' << sr.state.yaw_rate << ',' << sr.input.steer << ','
        << sr.input.accel << ',' << sr.solve_time_s << ',' << sr.iterations
        << ',' << qp_status_name(sr.qp_status) << ',' << (sr.fallback ? 1 : 0)
        << ',' << (sr.converged ? 1 : 0) << ',' << sr.lateral_error << ','
        << (std::isinf(sr.obstacle_distance) ? -1.0 : sr.obstacle_distance)
        << ',' << sr.objective << ',' << sr.ref_index << '\n';
  }
}

void save_metrics_json(const RunRecord& rec, const ResolvedScenario& rs,
                       const std::string& path) {
  nlohmann::json j;
  j["controller"] = controller_name(rec.controller);
  j["scenario"] = rs.scenario.name;
  j["steps"] = rec.metrics.steps;
  j["solve_time_s"] = {{"avg", rec.metrics.solve_avg_s},
                       {"max", rec.metrics.solve_max_s},
                       {"min", std::isinf(rec.metrics.solve_min_s)
                                   ? 0.0
                                   : rec.metrics.solve_min_s}};
  j["position_rmse_m"] = rec.metrics.position_rmse;
  j["max_lateral_left_m"] = rec.metrics.max_lateral_left;
  j["max_lateral_right_m"] = rec.metrics.max_lateral_right;
  if (std::isinf(rec.metrics.min_clearance)) {
    j["min_clearance_m"] = nullptr;
  } else {
    j["min_clearance_m"] = rec.metrics.min_clearance;
  }
  j["violation_count"] = rec.metrics.violation_count;
  j["fallback_count"] = rec.metrics.fallback_count;
  j["final_state"] = {{"x", rec.final_state.x},
                      {"y", rec.final_state.y},
                      {"v_lon", rec.final_state.v_lon},
                      {"v_lat", rec.final_state.v_lat},
                      {"yaw", rec.final_state.yaw},
                      {"yaw_rate", rec.final_state.yaw_rate}};
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace ovt
