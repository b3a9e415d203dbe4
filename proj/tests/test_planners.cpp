#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "swarmloop/plan/planners.hpp"

using namespace swarmloop;
using namespace swarmloop::plan;

namespace {

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DomainError& e) {
    return e.code();
  }
  return "";
}

// Independent near-square oracle: full 2D scan instead of the per-row
// shortcut used by the implementation.
std::pair<int, int> oracle_grid(double W, double H, int n) {
  int br = 0, bc = 0;
  double bs = std::numeric_limits<double>::infinity();
  for (int rows = 1; rows <= n + 1; ++rows) {
    for (int cols = 1; cols <= n + 1; ++cols) {
      const long long cells = static_cast<long long>(rows) * cols;
      if (cells < n || cells - n >= std::min(rows, cols)) continue;
      const double score = std::abs((W / cols) / (H / rows) - 1.0);
      const long long bcells = static_cast<long long>(br) * bc;
      if (br == 0 || score < bs ||
          (score == bs && (cells < bcells || (cells == bcells && rows < br)))) {
        bs = score;
        br = rows;
        bc = cols;
      }
    }
  }
  return {br, bc};
}

// Factorial oracle returning the lexicographically first optimal permutation.
std::pair<std::vector<int>, double> brute_force_assignment(
    const std::vector<std::vector<double>>& dist, bool maximize) {
  const int n = static_cast<int>(dist.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm;
  double best = maximize ? -1.0 : std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += dist[i][perm[i]];
    const bool better = maximize ? total > best + 1e-9 : total < best - 1e-9;
    if (best_perm.empty() || better) {
      best = total;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best_perm, best};
}

std::vector<std::vector<double>> distance_matrix(const std::vector<Vec3>& pos,
                                                 const std::vector<Slot>& slots) {
  std::vector<std::vector<double>> d(pos.size(), std::vector<double>(slots.size()));
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < slots.size(); ++j)
      d[i][j] = distance3(pos[i], Vec3{slots[j].x, slots[j].y, slots[j].alt});
  return d;
}

double min_pairwise(const std::vector<Slot>& slots) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < slots.size(); ++i)
    for (std::size_t j = i + 1; j < slots.size(); ++j)
      m = std::min(m, std::hypot(slots[i].x - slots[j].x, slots[i].y - slots[j].y));
  return m;
}

}  // namespace

TEST_CASE("footprint radius follows the half-angle tangent") {
  CHECK(footprint_radius(50.0, deg_to_rad(90.0)) == doctest::Approx(50.0));
  CHECK(footprint_radius(0.0, deg_to_rad(90.0)) == 0.0);
  // High-precision oracle: 30 * tan(pi/6) in long double.
  const long double expect = 30.0L * std::tan(static_cast<long double>(M_PI) / 6.0L);
  CHECK(footprint_radius(30.0, deg_to_rad(60.0)) ==
        doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));

  CHECK(error_code([] { footprint_radius(10.0, 0.0); }) == "InvalidFov");
  CHECK(error_code([] { footprint_radius(10.0, M_PI); }) == "InvalidFov");
  CHECK(error_code([] { footprint_radius(10.0, -1.0); }) == "InvalidFov");
}

TEST_CASE("coverage ratio is the disc-area sum over the region area") {
  const Region region{0, 0, 400, 300};
  const double fov = deg_to_rad(90.0);
  CHECK(coverage_ratio({}, fov, region) == 0.0);
  CHECK(coverage_ratio({{10, 10, 0}}, fov, region) == 0.0);  // grounded drone
  CHECK(coverage_ratio({{200, 150, 50}}, fov, region) ==
        doctest::Approx(M_PI * 2500.0 / 120000.0));

  std::mt19937 gen(1234);
  std::uniform_real_distribution<double> ux(0, 400), uy(0, 300), uz(5, 80);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Vec3> drones;
    for (int i = 0; i < 6; ++i) drones.push_back({ux(gen), uy(gen), uz(gen)});
    const double formula = coverage_ratio(drones, fov, region);

    // Monte-Carlo union estimate: overlap double-counting makes the formula
    // an upper bound (up to circle parts outside the region and MC noise).
    int inside = 0;
    const int kSamples = 100000;
    for (int s = 0; s < kSamples; ++s) {
      const Vec3 p{ux(gen), uy(gen), 0};
      for (const auto& d : drones) {
        const double r = d.z;  // tan(45 deg) = 1
        if (std::hypot(p.x - d.x, p.y - d.y) <= r) {
          ++inside;
          break;
        }
      }
    }
    const double mc = static_cast<double>(inside) / kSamples;
    CHECK(formula >= mc - 0.01);

    // Permutation and translation invariance.
    auto shuffled = drones;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(coverage_ratio(shuffled, fov, region) == doctest::Approx(formula));
    Region moved{region.origin_x + 137.0, region.origin_y - 52.0, region.width, region.height};
    std::vector<Vec3> moved_drones;
    for (const auto& d : drones) moved_drones.push_back({d.x + 137.0, d.y - 52.0, d.z});
    CHECK(coverage_ratio(moved_drones, fov, moved) == doctest::Approx(formula));
  }

  CHECK(error_code([&] { coverage_ratio({}, fov, Region{0, 0, -1, 300}); }) == "InvalidRegion");
}

TEST_CASE("single-drone coverage plan covers the whole region from one cell") {
  const Region region{0, 0, 400, 300};
  auto plan = plan_area_coverage(region, 1, deg_to_rad(90.0), 10.0, 120.0);
  CHECK(plan.rows == 1);
  CHECK(plan.cols == 1);
  CHECK(plan.r_cell == 250.0);  // exact: sqrt(400^2 + 300^2)/2 via 3-4-5
  CHECK(plan.altitude == 120.0);
  CHECK(plan.clamped);
  REQUIRE(plan.slots.size() == 1);
  CHECK(plan.slots[0].x == doctest::Approx(200.0));
  CHECK(plan.slots[0].y == doctest::Approx(150.0));
}

TEST_CASE("twelve-drone grid is exactly square on the 400x300 region") {
  const Region region{0, 0, 400, 300};
  auto plan = plan_area_coverage(region, 12, deg_to_rad(90.0), 10.0, 120.0);
  CHECK(plan.rows == 3);
  CHECK(plan.cols == 4);
  CHECK(plan.cell_w == doctest::Approx(100.0));
  CHECK(plan.cell_h == doctest::Approx(100.0));
  CHECK(plan.r_cell == doctest::Approx(std::sqrt(20000.0) / 2.0));
  CHECK_FALSE(plan.clamped);
  // Unclamped altitude reproduces the cell half-diagonal as the footprint.
  CHECK(footprint_radius(plan.altitude, deg_to_rad(90.0)) ==
        doctest::Approx(plan.r_cell).epsilon(1e-9));
}

TEST_CASE("grid choice matches the exhaustive oracle across sizes and regions") {
  const double fov = deg_to_rad(90.0);
  for (const auto& [W, H] : std::vector<std::pair<double, double>>{
           {400, 300}, {300, 400}, {100, 100}, {1000, 10}, {250, 900}}) {
    for (int n = 1; n <= 40; ++n) {
      auto plan = plan_area_coverage(Region{0, 0, W, H}, n, fov, 1.0, 1e6);
      const auto [rows, cols] = oracle_grid(W, H, n);
      CHECK(plan.rows == rows);
      CHECK(plan.cols == cols);
      CHECK(static_cast<int>(plan.slots.size()) == n);
      // Half-diagonal definition: every cell corner within r_cell of center.
      const double corner = std::hypot(plan.cell_w / 2.0, plan.cell_h / 2.0);
      CHECK(corner <= plan.r_cell + 1e-9);
      CHECK(corner == doctest::Approx(plan.r_cell));
      // Unclamped altitude closes the loop through the camera model.
      CHECK(footprint_radius(plan.altitude, fov) == doctest::Approx(plan.r_cell).epsilon(1e-9));
      for (const auto& s : plan.slots) {
        CHECK(s.x > 0.0);
        CHECK(s.x < W);
        CHECK(s.y > 0.0);
        CHECK(s.y < H);
        CHECK(s.alt == plan.altitude);
      }
    }
  }
}

TEST_CASE("coverage planning rejects bad inputs") {
  const Region region{0, 0, 400, 300};
  CHECK(error_code([&] { plan_area_coverage({0, 0, 0, 300}, 4, 1.0, 10, 120); }) ==
        "InvalidRegion");
  CHECK(error_code([&] { plan_area_coverage(region, 0, 1.0, 10, 120); }) == "InvalidRegion");
  CHECK(error_code([&] { plan_area_coverage(region, 4, 1.0, 0, 120); }) ==
        "InvalidAltitudeBounds");
  CHECK(error_code([&] { plan_area_coverage(region, 4, 1.0, 50, 20); }) ==
        "InvalidAltitudeBounds");
  CHECK(error_code([&] { plan_area_coverage(region, 4, 4.0, 10, 120); }) == "InvalidFov");
}

TEST_CASE("line formation places symmetric collinear slots") {
  auto plan = plan_drone_formation("line", 0, 0, 0, 5.0, 3, 15.0);
  REQUIRE(plan.slots.size() == 3);
  CHECK(plan.slots[0].x == doctest::Approx(-5.0));
  CHECK(plan.slots[1].x == doctest::Approx(0.0));
  CHECK(plan.slots[2].x == doctest::Approx(5.0));
  for (const auto& s : plan.slots) {
    CHECK(s.y == doctest::Approx(0.0));
    CHECK(s.alt == 15.0);
  }

  auto rotated = plan_drone_formation("line", 10, 20, M_PI / 2, 4.0, 2, 15.0);
  CHECK(rotated.slots[0].x == doctest::Approx(10.0));
  CHECK(rotated.slots[0].y == doctest::Approx(18.0));
  CHECK(rotated.slots[1].y == doctest::Approx(22.0));
}

TEST_CASE("circle formation has neighbor chords equal to spacing") {
  for (int n : {2, 4, 6, 10}) {
    auto plan = plan_drone_formation("circle", 50, 50, 0.3, 5.0, n, 20.0);
    REQUIRE(static_cast<int>(plan.slots.size()) == n);
    for (int i = 0; i < n; ++i) {
      const auto& a = plan.slots[i];
      const auto& b = plan.slots[(i + 1) % n];
      if (n > 2 || i == 0) CHECK(std::hypot(a.x - b.x, a.y - b.y) == doctest::Approx(5.0));
    }
    CHECK(min_pairwise(plan.slots) == doctest::Approx(5.0).epsilon(1e-9));
  }
}

TEST_CASE("star formation meets the spacing floor and keeps point symmetry") {
  for (int n : {4, 6, 10}) {
    auto plan = plan_drone_formation("star", 0, 0, 0, 5.0, n, 20.0);
    REQUIRE(static_cast<int>(plan.slots.size()) == n);
    CHECK(min_pairwise(plan.slots) == doctest::Approx(5.0).epsilon(1e-9));
  }

  // n=10 star on 5 points: rotating the slot set by 72 degrees maps it to itself.
  auto plan = plan_drone_formation("star", 30, -20, 0.7, 5.0, 10, 20.0);
  const double rot = 2.0 * M_PI / 5.0;
  for (const auto& s : plan.slots) {
    const double dx = s.x - 30.0, dy = s.y + 20.0;
    const double rx = 30.0 + dx * std::cos(rot) - dy * std::sin(rot);
    const double ry = -20.0 + dx * std::sin(rot) + dy * std::cos(rot);
    bool found = false;
    for (const auto& t : plan.slots)
      if (std::hypot(t.x - rx, t.y - ry) < 1e-6) found = true;
    CHECK(found);
  }
}

TEST_CASE("formation planning rejects bad inputs") {
  CHECK(error_code([] { plan_drone_formation("line", 0, 0, 0, 0.0, 3, 15); }) ==
        "InvalidSpacing");
  CHECK(error_code([] { plan_drone_formation("pentagram", 0, 0, 0, 5.0, 3, 15); }) ==
        "UnsupportedShape");
}

TEST_CASE("hungarian matches a hand-solved matrix") {
  const std::vector<std::vector<double>> cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  const auto perm = hungarian_min_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < 3; ++i) total += cost[i][perm[i]];
  CHECK(total == doctest::Approx(5.0));  // (0,1) (1,0) (2,2)
  CHECK(perm == std::vector<int>{1, 0, 2});
}

TEST_CASE("assignment matches factorial brute force on random instances") {
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> u(-50, 50);
  std::uniform_int_distribution<int> size(1, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = size(gen);
    std::vector<Vec3> pos;
    std::vector<Slot> slots;
    for (int i = 0; i < n; ++i) {
      pos.push_back({u(gen), u(gen), 0.0});
      slots.push_back({u(gen), u(gen), 15.0});
    }
    const auto dist = distance_matrix(pos, slots);
    for (const char* objective : {"maximize", "minimize"}) {
      const bool maximize = std::string(objective) == "maximize";
      const auto got = assign_slots(pos, slots, objective);
      const auto [want_perm, want_total] = brute_force_assignment(dist, maximize);
      CHECK(got.total_displacement == doctest::Approx(want_total).epsilon(1e-9));
      CHECK(got.permutation == want_perm);  // lexicographic tie-break agrees
      // Bijection check.
      auto sorted = got.permutation;
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < n; ++i) CHECK(sorted[i] == i);
    }
    const auto hi = assign_slots(pos, slots, "maximize").total_displacement;
    const auto lo = assign_slots(pos, slots, "minimize").total_displacement;
    CHECK(hi >= lo - 1e-9);
  }
}

TEST_CASE("assignment ties resolve to the lexicographically smallest permutation") {
  // All costs identical: every permutation is optimal, identity is smallest.
  std::vector<Vec3> same_pos{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  std::vector<Slot> same_slots{{7, 0, 0}, {7, 0, 0}, {7, 0, 0}};
  CHECK(assign_slots(same_pos, same_slots, "maximize").permutation ==
        std::vector<int>{0, 1, 2});
  CHECK(assign_slots(same_pos, same_slots, "minimize").permutation ==
        std::vector<int>{0, 1, 2});

  // Collinear equidistant points: maximize has three optima totaling 4;
  // first in lexicographic order is (1, 2, 0).
  std::vector<Vec3> line_pos{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  std::vector<Slot> line_slots{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const auto line = assign_slots(line_pos, line_slots, "maximize");
  CHECK(line.total_displacement == doctest::Approx(4.0));
  CHECK(line.permutation == std::vector<int>{1, 2, 0});

  // Two coincident drones: both pairings cost the same; keep identity.
  std::vector<Vec3> twin_pos{{0, 0, 0}, {0, 0, 0}};
  std::vector<Slot> twin_slots{{0, 0, 0}, {10, 0, 0}};
  CHECK(assign_slots(twin_pos, twin_slots, "maximize").permutation == std::vector<int>{0, 1});

  // Cross pairing doubles the displacement when drones sit on the slots.
  std::vector<Vec3> pos{{0, 0, 0}, {10, 0, 0}};
  std::vector<Slot> slots{{0, 0, 0}, {10, 0, 0}};
  const auto crossed = assign_slots(pos, slots, "maximize");
  CHECK(crossed.permutation == std::vector<int>{1, 0});
  CHECK(crossed.total_displacement == doctest::Approx(20.0));

  CHECK(error_code([&] { assign_slots(pos, {{0, 0, 0}}, "maximize"); }) == "SizeMismatch");
}

TEST_CASE("star detection accepts permutations and rejects outliers") {
  auto plan = plan_drone_formation("star", 100, 80, 0.2, 5.0, 10, 20.0);
  std::vector<Vec3> exact;
  for (const auto& s : plan.slots) exact.push_back({s.x, s.y, s.alt});
  CHECK(detect_star(exact, plan, 2.0));

  std::mt19937 gen(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = exact;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(detect_star(shuffled, plan, 2.0));
  }

  // Displace one drone radially outward by 2x the tolerance.
  auto off = exact;
  const double dx = off[0].x - 100.0, dy = off[0].y - 80.0;
  const double len = std::hypot(dx, dy);
  off[0].x += dx / len * 4.0;
  off[0].y += dy / len * 4.0;
  CHECK_FALSE(detect_star(off, plan, 2.0));

  CHECK(error_code([&] { detect_star({{0, 0, 0}}, plan, 2.0); }) == "SizeMismatch");
}

TEST_CASE("plans round-trip through json") {
  auto cov = plan_area_coverage(Region{0, 0, 400, 300}, 10, deg_to_rad(90.0), 10, 120);
  auto cov2 = CoveragePlan::from_json(cov.to_json());
  CHECK(cov2.to_json() == cov.to_json());

  auto form = plan_drone_formation("star", 10, 20, 0.5, 5.0, 10, 20.0);
  auto form2 = FormationPlan::from_json(form.to_json());
  CHECK(form2.to_json() == form.to_json());
}
