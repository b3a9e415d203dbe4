#include "swarmloop/plan/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace swarmloop::plan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double assignment_total(const std::vector<std::vector<double>>& cost, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += cost[i][perm[i]];
  return total;
}

// Best total over a sub-problem: rows `rows` matched to columns `cols`.
double hungarian_best_total(const std::vector<std::vector<double>>& cost,
                            const std::vector<int>& rows, const std::vector<int>& cols) {
  if (rows.empty()) return 0.0;
  std::vector<std::vector<double>> sub(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) sub[i][j] = cost[rows[i]][cols[j]];
  const auto perm = hungarian_min_assignment(sub);
  return assignment_total(sub, perm);
}

}  // namespace

json Region::to_json() const {
  return json{{"origin_x", origin_x}, {"origin_y", origin_y}, {"width", width}, {"height", height}};
}

Region Region::from_json(const json& j) {
  return {j.value("origin_x", 0.0), j.value("origin_y", 0.0), j.at("width").get<double>(),
          j.at("height").get<double>()};
}

json CoveragePlan::to_json() const {
  json s = json::array();
  for (const auto& slot : slots) s.push_back(slot.to_json());
  return json{{"rows", rows},     {"cols", cols},         {"cell_w", cell_w},
              {"cell_h", cell_h}, {"r_cell", r_cell},     {"altitude", altitude},
              {"clamped", clamped}, {"slots", std::move(s)}};
}

CoveragePlan CoveragePlan::from_json(const json& j) {
  CoveragePlan p;
  p.rows = j.at("rows").get<int>();
  p.cols = j.at("cols").get<int>();
  p.cell_w = j.at("cell_w").get<double>();
  p.cell_h = j.at("cell_h").get<double>();
  p.r_cell = j.at("r_cell").get<double>();
  p.altitude = j.at("altitude").get<double>();
  p.clamped = j.at("clamped").get<bool>();
  for (const auto& e : j.at("slots")) p.slots.push_back(Slot::from_json(e));
  return p;
}

json FormationPlan::to_json() const {
  json s = json::array();
  for (const auto& slot : slots) s.push_back(slot.to_json());
  return json{{"shape", shape},           {"center_x", center_x}, {"center_y", center_y},
              {"orientation", orientation}, {"spacing", spacing},   {"altitude", altitude},
              {"slots", std::move(s)}};
}

FormationPlan FormationPlan::from_json(const json& j) {
  FormationPlan p;
  p.shape = j.at("shape").get<std::string>();
  p.center_x = j.at("center_x").get<double>();
  p.center_y = j.at("center_y").get<double>();
  p.orientation = j.at("orientation").get<double>();
  p.spacing = j.at("spacing").get<double>();
  p.altitude = j.at("altitude").get<double>();
  for (const auto& e : j.at("slots")) p.slots.push_back(Slot::from_json(e));
  return p;
}

json AssignmentResult::to_json() const {
  return json{{"permutation", permutation},
              {"total_displacement", total_displacement},
              {"objective", objective}};
}

double footprint_radius(double h, double fov_rad) {
  if (!(fov_rad > 0.0) || !(fov_rad < M_PI))
    throw DomainError("InvalidFov", "fov must lie strictly between 0 and pi radians");
  return h * std::tan(fov_rad / 2.0);
}

double coverage_ratio(const std::vector<Vec3>& drone_positions, double fov_rad,
                      const Region& region) {
  if (!(region.width > 0.0) || !(region.height > 0.0))
    throw DomainError("InvalidRegion", "region sides must be strictly positive");
  double covered = 0.0;
  for (const auto& p : drone_positions) {
    const double r = footprint_radius(std::max(0.0, p.z), fov_rad);
    covered += M_PI * r * r;
  }
  return covered / region.area();
}

CoveragePlan plan_area_coverage(const Region& region, int n, double fov_rad, double alt_min,
                                double alt_max) {
  if (!(region.width > 0.0) || !(region.height > 0.0))
    throw DomainError("InvalidRegion", "region sides must be strictly positive");
  if (n < 1) throw DomainError("InvalidRegion", "drone count must be at least 1");
  if (!(alt_min > 0.0) || !(alt_min <= alt_max))
    throw DomainError("InvalidAltitudeBounds", "need 0 < alt_min <= alt_max");
  if (!(fov_rad > 0.0) || !(fov_rad < M_PI))
    throw DomainError("InvalidFov", "fov must lie strictly between 0 and pi radians");

  // Candidate grids: rows*cols >= n with surplus < min(rows, cols). For fixed
  // rows only cols = ceil(n/rows) can qualify (each extra column adds `rows`
  // to the surplus but at most 1 to min(rows, cols)). Pick the most square
  // cell; ties favor fewer cells, then fewer rows.
  int best_rows = 0, best_cols = 0;
  double best_score = kInf;
  for (int rows = 1; rows <= n; ++rows) {
    const int cols = (n + rows - 1) / rows;
    if (static_cast<long long>(rows) * cols - n >= std::min(rows, cols)) continue;
    const double cw = region.width / cols;
    const double ch = region.height / rows;
    const double score = std::abs(cw / ch - 1.0);
    const long long cells = static_cast<long long>(rows) * cols;
    const long long best_cells = static_cast<long long>(best_rows) * best_cols;
    if (best_rows == 0 || score < best_score ||
        (score == best_score &&
         (cells < best_cells || (cells == best_cells && rows < best_rows)))) {
      best_score = score;
      best_rows = rows;
      best_cols = cols;
    }
  }

  CoveragePlan plan;
  plan.rows = best_rows;
  plan.cols = best_cols;
  plan.cell_w = region.width / best_cols;
  plan.cell_h = region.height / best_rows;
  plan.r_cell = std::sqrt(plan.cell_w * plan.cell_w + plan.cell_h * plan.cell_h) / 2.0;
  const double raw_alt = plan.r_cell / std::tan(fov_rad / 2.0);
  plan.altitude = std::clamp(raw_alt, alt_min, alt_max);
  plan.clamped = plan.altitude != raw_alt;
  for (int r = 0; r < best_rows && static_cast<int>(plan.slots.size()) < n; ++r) {
    for (int c = 0; c < best_cols && static_cast<int>(plan.slots.size()) < n; ++c) {
      plan.slots.push_back({region.origin_x + (c + 0.5) * plan.cell_w,
                            region.origin_y + (r + 0.5) * plan.cell_h, plan.altitude});
    }
  }
  return plan;
}

FormationPlan plan_drone_formation(const std::string& shape, double center_x, double center_y,
                                   double orientation, double spacing, int n, double altitude) {
  if (!(spacing > 0.0)) throw DomainError("InvalidSpacing", "spacing must be strictly positive");
  if (n < 1) throw DomainError("InvalidSpacing", "slot count must be at least 1");

  FormationPlan plan;
  plan.shape = shape;
  plan.center_x = center_x;
  plan.center_y = center_y;
  plan.orientation = orientation;
  plan.spacing = spacing;
  plan.altitude = altitude;

  const double co = std::cos(orientation);
  const double so = std::sin(orientation);

  if (shape == "line") {
    for (int i = 0; i < n; ++i) {
      const double t = (i - (n - 1) / 2.0) * spacing;
      plan.slots.push_back({center_x + t * co, center_y + t * so, altitude});
    }
  } else if (shape == "circle") {
    // Neighbor chord equals spacing: R = s / (2 sin(pi/n)).
    const double radius = n == 1 ? 0.0 : spacing / (2.0 * std::sin(M_PI / n));
    for (int i = 0; i < n; ++i) {
      const double a = orientation + 2.0 * M_PI * i / n;
      plan.slots.push_back({center_x + radius * std::cos(a), center_y + radius * std::sin(a),
                            altitude});
    }
  } else if (shape == "star") {
    // Star polygon with ceil(n/2) points, alternating outer/inner radii
    // (inner = outer/2), scaled so the min pairwise distance equals spacing.
    const int points = (n + 1) / 2;
    std::vector<std::pair<double, double>> unit;
    for (int j = 0; j < n; ++j) {
      const double a = orientation + M_PI * j / points;
      const double r = (j % 2 == 0) ? 1.0 : 0.5;
      unit.emplace_back(r * std::cos(a), r * std::sin(a));
    }
    double min_d = kInf;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        min_d = std::min(min_d, std::hypot(unit[i].first - unit[j].first,
                                           unit[i].second - unit[j].second));
    const double scale = n == 1 ? spacing : spacing / min_d;
    for (const auto& [ux, uy] : unit)
      plan.slots.push_back({center_x + scale * ux, center_y + scale * uy, altitude});
  } else {
    throw DomainError("UnsupportedShape", "unsupported formation shape: " + shape);
  }
  return plan;
}

std::vector<int> hungarian_min_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const int m = static_cast<int>(cost[0].size());

  // Potentials formulation; 1-based with column 0 as the scratch column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> result(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) result[p[j] - 1] = j - 1;
  return result;
}

AssignmentResult assign_slots(const std::vector<Vec3>& positions, const std::vector<Slot>& slots,
                              const std::string& objective) {
  if (positions.size() != slots.size())
    throw DomainError("SizeMismatch", "positions and slots must have equal length");
  if (objective != "maximize" && objective != "minimize")
    throw DomainError("SizeMismatch", "objective must be maximize or minimize");
  const int n = static_cast<int>(positions.size());

  AssignmentResult result;
  result.objective = objective;
  if (n == 0) return result;

  const bool maximize = objective == "maximize";
  std::vector<std::vector<double>> dist(n, std::vector<double>(n));
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dist[i][j] = distance3(positions[i], Vec3{slots[j].x, slots[j].y, slots[j].alt});
      cost[i][j] = maximize ? -dist[i][j] : dist[i][j];
    }
  }

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const double best = hungarian_best_total(cost, all, all);
  const double eps = 1e-9 * std::max(1.0, std::abs(best));

  // Fix rows in order, taking the smallest column that preserves optimality:
  // yields the lexicographically smallest optimal permutation.
  std::vector<int> perm(n, -1);
  std::vector<int> free_cols(all);
  double fixed_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_rows(all.begin() + i + 1, all.end());
    for (std::size_t k = 0; k < free_cols.size(); ++k) {
      const int j = free_cols[k];
      std::vector<int> rest_cols;
      for (std::size_t t = 0; t < free_cols.size(); ++t)
        if (t != k) rest_cols.push_back(free_cols[t]);
      const double total = fixed_cost + cost[i][j] + hungarian_best_total(cost, rest_rows, rest_cols);
      if (total <= best + eps) {
        perm[i] = j;
        fixed_cost += cost[i][j];
        free_cols.erase(free_cols.begin() + k);
        break;
      }
    }
  }

  result.permutation = perm;
  for (int i = 0; i < n; ++i) result.total_displacement += dist[i][perm[i]];
  return result;
}

bool detect_star(const std::vector<Vec3>& final_positions, const FormationPlan& plan, double tol) {
  if (final_positions.size() != plan.slots.size())
    throw DomainError("SizeMismatch", "positions and plan slots must have equal length");
  const int n = static_cast<int>(final_positions.size());
  if (n == 0) return true;

  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto& s = plan.slots[j];
      const double d = distance3(final_positions[i], Vec3{s.x, s.y, s.alt});
      cost[i][j] = d * d;
    }
  }
  const auto perm = hungarian_min_assignment(cost);
  for (int i = 0; i < n; ++i) {
    if (std::sqrt(cost[i][perm[i]]) > tol) return false;
  }
  return true;
}

}  // namespace swarmloop::plan
