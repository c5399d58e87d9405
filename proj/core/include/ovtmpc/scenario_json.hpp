#pragma once

#include <string>

#include "ovtmpc/simulation.hpp"

namespace ovt {

// Scenario files are JSON with five sections: road, vehicle, mpc, obstacle,
// run. Every field is optional and defaults to the stock configuration;
// unknown keys are rejected so typos fail loudly instead of silently running
// the defaults. The road section takes exactly one of the sine-generator
// parameters, a waypoints_csv path (resolved against the scenario file's
// directory), or an inline waypoints array.
Scenario load_scenario_json(const std::string& path);

Scenario parse_scenario_json(const std::string& text,
                             const std::string& base_dir);

// Serializes the scenario with all defaults applied, waypoints inline if the
// road came from a file. Written next to run artifacts so downstream tooling
// never needs the original scenario file.
std::string scenario_to_json(const Scenario& s);

}  // namespace ovt
