#pragma once

#include <string>
#include <vector>

#include "swarmloop/common.hpp"

namespace swarmloop::plan {

struct Region {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  json to_json() const;
  static Region from_json(const json& j);
};

struct Slot {
  double x = 0.0;
  double y = 0.0;
  double alt = 0.0;

  json to_json() const { return json{{"x", x}, {"y", y}, {"alt", alt}}; }
  static Slot from_json(const json& j) {
    return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("alt").get<double>()};
  }
};

struct CoveragePlan {
  int rows = 0;
  int cols = 0;
  double cell_w = 0.0;
  double cell_h = 0.0;
  double r_cell = 0.0;
  double altitude = 0.0;
  bool clamped = false;
  std::vector<Slot> slots;

  json to_json() const;
  static CoveragePlan from_json(const json& j);
};

struct FormationPlan {
  std::string shape;  // line | circle | star
  double center_x = 0.0;
  double center_y = 0.0;
  double orientation = 0.0;  // radians
  double spacing = 0.0;
  double altitude = 0.0;
  std::vector<Slot> slots;

  json to_json() const;
  static FormationPlan from_json(const json& j);
};

struct AssignmentResult {
  std::vector<int> permutation;  // drone index -> slot index, a bijection
  double total_displacement = 0.0;
  std::string objective;  // maximize | minimize

  json to_json() const;
};

/// Ground radius seen by a downward camera at height h with full angle fov.
double footprint_radius(double h, double fov_rad);  // throws InvalidFov

/// Sum of per-drone footprint disc areas over the region area. Overlap is
/// double-counted by definition, so the value can exceed 1.
double coverage_ratio(const std::vector<Vec3>& drone_positions, double fov_rad,
                      const Region& region);

/// Near-square grid decomposition with one cell-center slot per drone and a
/// shared altitude chosen so the camera footprint covers a whole cell,
/// clamped to [alt_min, alt_max].
CoveragePlan plan_area_coverage(const Region& region, int n, double fov_rad, double alt_min,
                                double alt_max);

/// Slot generation for line, circle, and star formations around a center.
FormationPlan plan_drone_formation(const std::string& shape, double center_x, double center_y,
                                   double orientation, double spacing, int n, double altitude);

/// Exact solution of the assignment over the pairwise distance matrix.
/// Ties resolved toward the lexicographically smallest permutation.
AssignmentResult assign_slots(const std::vector<Vec3>& positions, const std::vector<Slot>& slots,
                              const std::string& objective);

/// True iff some bijection matches every final position to a distinct slot
/// within tol, decided via a minimum-cost assignment over squared distances.
bool detect_star(const std::vector<Vec3>& final_positions, const FormationPlan& plan, double tol);

/// Minimum-total-cost assignment on a square matrix; returns row -> column.
std::vector<int> hungarian_min_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace swarmloop::plan
