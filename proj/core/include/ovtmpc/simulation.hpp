#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ovtmpc/lpv_mpc.hpp"
#include "ovtmpc/nmpc.hpp"

namespace ovt {

enum class ControllerKind { Nmpc, Lpvmpc };

const char* controller_name(ControllerKind kind);

// Everything a closed-loop run needs. The road comes either from the sine
// generator (waypoints empty) or from an explicit waypoint list.
struct Scenario {
  std::string name = "scenario";
  RoadSpec road;
  std::vector<Waypoint> waypoints;
  VehicleParams vehicle;
  MpcConfig mpc;
  SqpSettings sqp;
  std::vector<ObstacleCircle> obstacles;  // at most one
  VehicleState initial_state{0.0, 0.0, 10.0, 0.0, 0.0, 0.0};
  bool align_initial_yaw = true;  // start pointed along the road
  int duration_steps = 400;
  int plant_substeps = 1;
};

void validate_scenario(const Scenario& s);

// Scenario with the road rolled out to waypoints and reference states once,
// shared by every run and by the metrics computation.
struct ResolvedScenario {
  Scenario scenario;
  std::vector<Waypoint> waypoints;
  std::vector<ReferenceState> refs;
};

ResolvedScenario resolve(const Scenario& s);

struct StepRecord {
  int step = 0;
  VehicleState state;  // measured state the controller saw
  ControlInput input;  // input applied to the plant
  double solve_time_s = 0.0;
  int iterations = 0;
  QpStatus qp_status = QpStatus::Optimal;
  bool fallback = false;
  bool converged = true;
  double lateral_error = 0.0;
  double obstacle_distance = 0.0;  // to the center; +inf when no obstacle
  double objective = 0.0;
  std::size_t ref_index = 0;  // window start on the reference polyline
};

struct Metrics {
  double solve_avg_s = 0.0;  // step 0 excluded as warm-up when steps >= 2
  double solve_max_s = 0.0;
  double solve_min_s = 0.0;
  double position_rmse = 0.0;  // distance to the waypoint polyline, steps >= 20
  double max_lateral_left = 0.0;   // peak lateral error toward +e
  double max_lateral_right = 0.0;  // peak toward -e, reported as a magnitude
  double min_clearance = 0.0;      // min center distance minus radius; +inf sentinel
  int violation_count = 0;  // road band beyond the 0.05 m soft allowance,
                            // obstacle penetration, or an input limit breach
  int fallback_count = 0;
  int steps = 0;
};

struct RunRecord {
  ControllerKind controller = ControllerKind::Lpvmpc;
  std::vector<StepRecord> steps;
  VehicleState final_state;
  Metrics metrics;
};

// Closed loop: match the reference window to the vehicle's position along the
// polyline, run the controller, push the first input through the nonlinear
// plant. Controller-side speed degeneracy is absorbed as a braking fallback
// step; plant-side degeneracy propagates, since the physics has left the
// model's validity region and no recorded number would mean anything.
RunRecord run(const ResolvedScenario& rs, ControllerKind kind,
              QpDumpHook dump = nullptr);

Metrics compute_metrics(const RunRecord& rec, const ResolvedScenario& rs);

// Index of the vertex nearest to (x, y), searched forward from `from` so the
// window never moves backward along the road.
std::size_t nearest_ref_index(const std::vector<Waypoint>& wps, double x,
                              double y, std::size_t from, std::size_t last);

double distance_to_polyline(const std::vector<Waypoint>& wps, double x,
                            double y);

void save_trajectory_csv(const RunRecord& rec, const std::string& path);
void save_metrics_json(const RunRecord& rec, const ResolvedScenario& rs,
                       const std::string& path);

}  // namespace ovt
