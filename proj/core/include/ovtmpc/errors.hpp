#pragma once

#include <stdexcept>
#include <string>

namespace ovt {

// Longitudinal speed fell below the model's validity floor. The slip-angle
// expressions divide by v_lon, so callers get an error instead of a silent
// saturation.
struct DegenerateSpeed : std::runtime_error {
  explicit DegenerateSpeed(double v_lon)
      : std::runtime_error("longitudinal speed " + std::to_string(v_lon) +
                           " m/s is below the 1 m/s validity floor") {}
};

struct CoincidentWaypoints : std::runtime_error {
  explicit CoincidentWaypoints(std::size_t index)
      : std::runtime_error("waypoints " + std::to_string(index) + " and " +
                           std::to_string(index + 1) + " coincide") {}
};

struct TooFewWaypoints : std::runtime_error {
  explicit TooFewWaypoints(std::size_t count)
      : std::runtime_error("need at least 2 waypoints, got " + std::to_string(count)) {}
};

struct InvalidSpec : std::runtime_error {
  explicit InvalidSpec(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyRecord : std::runtime_error {
  EmptyRecord() : std::runtime_error("run record contains no steps") {}
};

}  // namespace ovt
