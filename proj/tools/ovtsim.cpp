// ovtsim: closed-loop MPC simulation driver.
//
//   ovtsim run scenario.json --controller lpvmpc --out runs/demo
//   ovtsim compare scenario.json --out runs/cmp
//   ovtsim plotdata runs/cmp --downsample 5
//
// run/compare write per-controller trajectory CSVs and metrics JSON plus a
// fully resolved copy of the scenario; plotdata turns such a directory into
// plain CSV bundles (path, inputs, road boundaries, obstacle outline) that
// any plotting tool can consume.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "ovtmpc/errors.hpp"
#include "ovtmpc/scenario_json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitRunFailure = 3;

struct CommonOpts {
  std::string scenario_path;
  std::string out_dir;
  std::string controller = "lpvmpc";
  bool dump_qp = false;
  int substeps = 0;  // 0 keeps the scenario's value
  unsigned seed = 0;
  bool verbose = false;
};

// Small deterministic perturbation of the initial state so repeated runs with
// different seeds explore slightly different closed loops. Seed 0 is the
// scenario exactly as written.
void apply_seed(ovt::Scenario& s, unsigned seed) {
  if (seed == 0) return;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> pos(-0.1, 0.1);
  std::uniform_real_distribution<double> vel(-0.2, 0.2);
  std::uniform_real_distribution<double> ang(-0.01, 0.01);
  s.initial_state.x += pos(rng);
  s.initial_state.y += pos(rng);
  s.initial_state.v_lon += vel(rng);
  s.initial_state.yaw += ang(rng);
}

ovt::Scenario load_with_overrides(const CommonOpts& opts) {
  ovt::Scenario s = ovt::load_scenario_json(opts.scenario_path);
  if (opts.substeps > 0) s.plant_substeps = opts.substeps;
  apply_seed(s, opts.seed);
  return s;
}

ovt::QpDumpHook make_dump_hook(const fs::path& dir) {
  fs::create_directories(dir);
  auto seq = std::make_shared<int>(0);
  return [dir, seq](int step, const ovt::QpProblem& qp) {
    json j;
    j["step"] = step;
    j["n"] = qp.n();
    j["m"] = qp.m();
    auto mat = [](const Eigen::MatrixXd& m) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
      }
      return rows;
    };
    auto vec = [](const Eigen::VectorXd& v) {
      json arr = json::array();
      for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
      return arr;
    };
    j["h"] = mat(qp.cost_h);
    j["f"] = vec(qp.cost_f);
    j["g"] = mat(qp.ineq_g);
    j["rhs"] = vec(qp.ineq_h);
    std::ostringstream name;
    name << "qp_" << std::setw(6) << std::setfill('0') << (*seq)++ << "_step"
         << step << ".json";
    std::ofstream out(dir / name.str());
    out << j.dump() << '\n';
  };
}

void print_step_line(const ovt::StepRecord& sr, const char* ctrl) {
  std::cerr << ctrl << " step " << sr.step << ": t=" << sr.solve_time_s * 1e3
            << " ms, iters=" << sr.iterations << ", e_lat=" << sr.lateral_error
            << (sr.fallback ? " [fallback]" : "") << '\n';
}

int run_one(const ovt::ResolvedScenario& rs, ovt::ControllerKind kind,
            const fs::path& out, const CommonOpts& opts,
            ovt::RunRecord& rec_out) {
  ovt::QpDumpHook dump;
  if (opts.dump_qp) {
    dump = make_dump_hook(out / (std::string("qp_dump_") +
                                 ovt::controller_name(kind)));
  }
  rec_out = ovt::run(rs, kind, dump);
  if (opts.verbose) {
    for (const ovt::StepRecord& sr : rec_out.steps) {
      print_step_line(sr, ovt::controller_name(kind));
    }
  }
  const std::string tag = ovt::controller_name(kind);
  ovt::save_trajectory_csv(rec_out, (out / ("trajectory_" + tag + ".csv")).string());
  ovt::save_metrics_json(rec_out, rs, (out / ("metrics_" + tag + ".json")).string());
  return rec_out.metrics.violation_count == 0 ? 0 : kExitRunFailure;
}

std::vector<ovt::ControllerKind> selected_controllers(const std::string& c) {
  if (c == "nmpc") return {ovt::ControllerKind::Nmpc};
  if (c == "lpvmpc") return {ovt::ControllerKind::Lpvmpc};
  return {ovt::ControllerKind::Nmpc, ovt::ControllerKind::Lpvmpc};
}

int cmd_run(const CommonOpts& opts) {
  ovt::Scenario s = load_with_overrides(opts);
  if (opts.verbose && !s.sqp.trace) {
    s.sqp.trace = [](int it, double merit, double step, double feas) {
      std::cerr << "  sqp iter " << it << ": merit=" << merit
                << ", step=" << step << ", feas=" << feas << '\n';
    };
  }
  ovt::ResolvedScenario rs = ovt::resolve(s);

  const fs::path out = opts.out_dir.empty() ? fs::path("runs") / s.name
                                            : fs::path(opts.out_dir);
  fs::create_directories(out);
  {
    std::ofstream f(out / "scenario_resolved.json");
    ovt::Scenario echo = rs.scenario;
    echo.waypoints = rs.waypoints;
    f << ovt::scenario_to_json(echo);
  }

  int code = 0;
  for (ovt::ControllerKind kind : selected_controllers(opts.controller)) {
    ovt::RunRecord rec;
    code = std::max(code, run_one(rs, kind, out, opts, rec));
    std::cout << ovt::controller_name(kind) << ": " << rec.metrics.steps
              << " steps, avg solve " << rec.metrics.solve_avg_s * 1e3
              << " ms, rmse " << rec.metrics.position_rmse << " m, violations "
              << rec.metrics.violation_count << '\n';
  }
  return code;
}

json metrics_json(const ovt::Metrics& m) {
  json j;
  j["solve_avg_s"] = m.solve_avg_s;
  j["solve_max_s"] = m.solve_max_s;
  j["solve_min_s"] = std::isinf(m.solve_min_s) ? 0.0 : m.solve_min_s;
  j["position_rmse_m"] = m.position_rmse;
  j["max_lateral_left_m"] = m.max_lateral_left;
  j["max_lateral_right_m"] = m.max_lateral_right;
  if (std::isinf(m.min_clearance)) {
    j["min_clearance_m"] = nullptr;
  } else {
    j["min_clearance_m"] = m.min_clearance;
  }
  j["violation_count"] = m.violation_count;
  j["fallback_count"] = m.fallback_count;
  return j;
}

int cmd_compare(const CommonOpts& opts) {
  ovt::Scenario s = load_with_overrides(opts);
  ovt::ResolvedScenario rs = ovt::resolve(s);

  const fs::path out = opts.out_dir.empty() ? fs::path("runs") / (s.name + "_compare")
                                            : fs::path(opts.out_dir);
  fs::create_directories(out);
  {
    std::ofstream f(out / "scenario_resolved.json");
    ovt::Scenario echo = rs.scenario;
    echo.waypoints = rs.waypoints;
    f << ovt::scenario_to_json(echo);
  }

  // Sequential on purpose: the whole point of the comparison is wall-clock
  // solve time, which parallel runs would contaminate.
  ovt::RunRecord nmpc_rec, lpv_rec;
  int code = run_one(rs, ovt::ControllerKind::Nmpc, out, opts, nmpc_rec);
  code = std::max(code, run_one(rs, ovt::ControllerKind::Lpvmpc, out, opts, lpv_rec));

  const double ratio = lpv_rec.metrics.solve_avg_s > 0.0
                           ? nmpc_rec.metrics.solve_avg_s / lpv_rec.metrics.solve_avg_s
                           : 0.0;

  auto row = [](const char* name, const ovt::Metrics& m) {
    std::ostringstream os;
    os << name << '\t' << m.solve_avg_s * 1e3 << '\t' << m.solve_max_s * 1e3
       << '\t' << m.solve_min_s * 1e3 << '\t' << m.position_rmse << '\t';
    if (std::isinf(m.min_clearance)) {
      os << "n/a";
    } else {
      os << m.min_clearance;
    }
    os << '\t' << m.fallback_count;
    return os.str();
  };
  std::cout << "controller\tavg_ms\tmax_ms\tmin_ms\trmse_m\tclearance_m\tfallbacks\n"
            << row("nmpc", nmpc_rec.metrics) << '\n'
            << row("lpvmpc", lpv_rec.metrics) << '\n'
            << "speedup nmpc/lpvmpc: " << ratio << "x\n";

  json cmp;
  cmp["scenario"] = s.name;
  cmp["nmpc"] = metrics_json(nmpc_rec.metrics);
  cmp["lpvmpc"] = metrics_json(lpv_rec.metrics);
  cmp["speedup_avg"] = ratio;
  std::ofstream f(out / "compare.json");
  f << cmp.dump(2) << '\n';
  return code;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ovt::ScenarioError("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

int cmd_plotdata(const std::string& record_dir, int downsample) {
  const fs::path dir(record_dir);
  const fs::path scenario_file = dir / "scenario_resolved.json";
  if (!fs::exists(scenario_file)) {
    std::cerr << "no scenario_resolved.json in " << record_dir << '\n';
    return kExitSchema;
  }

  std::vector<fs::path> trajectories;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("trajectory_", 0) == 0 && entry.path().extension() == ".csv") {
      trajectories.push_back(entry.path());
    }
  }
  if (trajectories.empty()) {
    std::cerr << "no trajectory CSVs in " << record_dir << '\n';
    return kExitSchema;
  }

  ovt::Scenario s = ovt::load_scenario_json(scenario_file.string());
  ovt::ResolvedScenario rs = ovt::resolve(s);

  std::ofstream center(dir / "road_center.csv");
  std::ofstream left(dir / "road_left.csv");
  std::ofstream right(dir / "road_right.csv");
  center << "x,y\n";
  left << "x,y\n";
  right << "x,y\n";
  center.precision(10);
  left.precision(10);
  right.precision(10);
  for (const ovt::ReferenceState& r : rs.refs) {
    const double nx = -std::sin(r.yaw);
    const double ny = std::cos(r.yaw);
    center << r.x << ',' << r.y << '\n';
    left << r.x + s.mpc.road_r2 * nx << ',' << r.y + s.mpc.road_r2 * ny << '\n';
    right << r.x - s.mpc.road_r1 * nx << ',' << r.y - s.mpc.road_r1 * ny << '\n';
  }

  if (!s.obstacles.empty()) {
    const ovt::ObstacleCircle& o = s.obstacles.front();
    std::ofstream obs(dir / "obstacle.csv");
    obs << "x,y\n";
    obs.precision(10);
    for (int i = 0; i < 64; ++i) {
      const double th = 2.0 * M_PI * i / 64.0;
      obs << o.cx + o.radius * std::cos(th) << ','
          << o.cy + o.radius * std::sin(th) << '\n';
    }
  }

  for (const fs::path& traj : trajectories) {
    const std::string stem = traj.stem().string();  // trajectory_<ctrl>
    const std::string tag = stem.substr(std::string("trajectory_").size());
    const auto rows = read_csv(traj);
    if (rows.size() < 2) continue;

    std::ofstream path_out(dir / ("path_" + tag + ".csv"));
    path_out << "step,x,y,lateral_error\n";
    for (std::size_t i = 1; i < rows.size(); i += downsample) {
      const auto& r = rows[i];
      path_out << r[0] << ',' << r[1] << ',' << r[2] << ',' << r[14] << '\n';
    }

    std::ofstream input_out(dir / ("inputs_" + tag + ".csv"));
    input_out << "step,steer,accel\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      input_out << r[0] << ',' << r[7] << ',' << r[8] << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop vehicle MPC simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string record_dir;
  int downsample = 5;

  CLI::App* run = app.add_subcommand("run", "Run a scenario with one or both controllers");
  run->add_option("scenario", opts.scenario_path, "Scenario JSON file")
      ->required();
  run->add_option("--controller", opts.controller, "nmpc, lpvmpc, or both")
      ->check(CLI::IsMember({"nmpc", "lpvmpc", "both"}))
      ->capture_default_str();
  run->add_option("--out", opts.out_dir, "Output directory (default runs/<name>)");
  run->add_flag("--dump-qp", opts.dump_qp, "Dump every QP to JSON");
  run->add_option("--substeps", opts.substeps, "Plant integration substeps override")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", opts.seed,
                  "Perturb the initial state deterministically (0 = exact)");
  run->add_flag("--verbose", opts.verbose, "Per-step and per-iteration traces");

  CLI::App* cmp = app.add_subcommand("compare", "Run both controllers and report side by side");
  cmp->add_option("scenario", opts.scenario_path, "Scenario JSON file")
      ->required();
  cmp->add_option("--out", opts.out_dir, "Output directory");
  cmp->add_flag("--dump-qp", opts.dump_qp, "Dump every QP to JSON");
  cmp->add_option("--substeps", opts.substeps, "Plant integration substeps override")
      ->check(CLI::PositiveNumber);
  cmp->add_option("--seed", opts.seed,
                  "Perturb the initial state deterministically (0 = exact)");
  cmp->add_flag("--verbose", opts.verbose, "Per-step traces");

  CLI::App* plot = app.add_subcommand("plotdata", "Emit plot-ready CSV bundles from a run directory");
  plot->add_option("record", record_dir, "Directory written by run/compare")
      ->required();
  plot->add_option("--downsample", downsample, "Keep every Nth path sample")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand(run)) return cmd_run(opts);
    if (app.got_subcommand(cmp)) return cmd_compare(opts);
    return cmd_plotdata(record_dir, downsample);
  } catch (const ovt::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRunFailure;
  }
}
