#include <doctest.h>

#include <cmath>
#include <sstream>

#include "navstack/sim.hpp"

using namespace navstack;
using namespace navstack::sim;

namespace {

World world_with(double x, double y) {
  World w;
  w.targets.push_back({"person", {x, y, 0.0}, 0.0});
  return w;
}

DetectorModel clean() {
  DetectorModel d;
  d.noise = 0.0;
  return d;
}

PolicyFactory oracle(StatesMode mode = StatesMode::kFour) {
  PolicyOptions o;
  o.mode = mode;
  return policy_factory(o);
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("projection geometry") {
  Rng rng(1);
  const auto ahead = project_detection(world_with(1.0, 0.0), {}, clean(), "person", rng);
  REQUIRE(ahead);
  CHECK(ahead->cx == doctest::Approx(0.5));
  CHECK(ahead->cy == doctest::Approx(0.5));
  CHECK(ahead->h == doctest::Approx(0.9));
  CHECK(ahead->w == doctest::Approx(0.54));

  const double b = 50.0 * kPi / 180.0;
  CHECK_FALSE(project_detection(world_with(3 * std::cos(b), -3 * std::sin(b)), {}, clean(), "person", rng));
  CHECK_FALSE(project_detection(world_with(8.0, 0.0), {}, clean(), "person", rng));

  // Clockwise bearing: a target to the right lands right of centre.
  const double r = 30.0 * kPi / 180.0;
  const auto right = project_detection(world_with(2 * std::cos(r), -2 * std::sin(r)), {}, clean(), "person", rng);
  REQUIRE(right);
  CHECK(right->cx == doctest::Approx(0.5 + 30.0 / 90.0));
  CHECK_FALSE(project_detection(world_with(1.0, 0.0), {}, clean(), "chair", rng));
}

TEST_CASE("projection is None outside the fan, whatever the noise") {
  Rng rng(2);
  DetectorModel d;
  for (int i = 0; i < 20000; ++i) {
    const double dist = rng.uniform(0.1, 12.0);
    const double bearing = rng.uniform(-kPi, kPi);
    const auto w = world_with(dist * std::cos(bearing), -dist * std::sin(bearing));
    const auto det = project_detection(w, {}, d, "person", rng);
    if (dist > 7.5 || std::abs(bearing) > kPi / 4) REQUIRE_FALSE(det.has_value());
  }
}

TEST_CASE("high blur drops harder classes first") {
  Rng rng(3);
  auto w = world_with(2.0, 0.0);
  w.targets.push_back({"backpack", {2.0, 0.1, 0.0}, 0.0});
  CHECK(project_detection(w, {}, clean(), "person", rng, 0.5));
  CHECK_FALSE(project_detection(w, {}, clean(), "backpack", rng, 0.5));
}

TEST_CASE("kinematics") {
  World w;
  step_world(w, {}, nullptr, 1);
  CHECK(w.tracker.x == 0.0);
  CHECK(w.tracker.y == 0.0);
  CHECK(w.tracker.heading == 0.0);

  step_world(w, {0.4, 0, 0}, nullptr, 1);
  CHECK(w.tracker.x == doctest::Approx(0.4 / 15.0));

  World spin;
  const auto ticks = static_cast<int>(std::lround(2 * kPi / 0.3 / kDt));
  for (int t = 0; t < ticks; ++t) step_world(spin, {0, 0, 0.3}, nullptr, t + 1);
  const double residual = std::remainder(spin.tracker.heading, 2 * kPi);
  CHECK(std::abs(residual) <= 0.3 * kDt);
}

TEST_CASE("oracle tracks a stationary target for the full episode") {
  auto p = oracle()();
  TrackingSpec spec;
  const auto r = run_tracking(*p, spec, 1);
  CHECK(r.EL == 500);
  CHECK(r.success);
}

TEST_CASE("zero policy loses a departing target 50 ticks after it leaves the fan") {
  ConstantPolicy zero;
  TrackingSpec spec;
  spec.suite = Suite::kStraight;
  const auto r = run_tracking(zero, spec, 4);
  CHECK_FALSE(r.success);

  World w;
  w.targets.push_back({"person", {}, 0.0});
  TrajectoryScript script(Suite::kStraight, 4, spec.speed);
  script.place(w);
  std::size_t first_loss = 0;
  for (std::size_t t = 1; t <= 500 && !first_loss; ++t) {
    step_world(w, {}, &script, t);
    if (!in_fan(w, spec.fan, w.targets[0].pose)) first_loss = t;
  }
  REQUIRE(first_loss > 0);
  CHECK(r.EL == first_loss + spec.fail_after - 1);
}

TEST_CASE("rule policy closes in on a visible stationary target") {
  RulePolicy p(ExecContext{}, StatesMode::kFour);
  World w = world_with(5.0, -0.8);
  DetectorModel d = clean();
  Rng rng(5);
  double prev = relative(w.tracker, w.targets[0].pose).distance;
  const MissionInstruction in{instruction_text("person", 0.5), "person", 0.5};
  bool done = false;
  for (int t = 1; t <= 600 && !done; ++t) {
    const auto tick = p.act(in, project_detection(w, {}, d, "person", rng));
    done = tick.state == ActiveState::kSuccess;
    step_world(w, tick.command, nullptr, static_cast<std::size_t>(t));
    const double now = relative(w.tracker, w.targets[0].pose).distance;
    CHECK(now <= prev + 1e-12);
    prev = now;
  }
  CHECK(done);
}

TEST_CASE("person navigation with four states and the gate searches once") {
  auto p = oracle()();
  NavigationSpec spec;
  spec.cls = "person";
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto r = run_navigation(*p, spec, s);
    CHECK(r.success);
    CHECK(r.N_s == 1);
  }
}

TEST_CASE("displaced target is found again") {
  auto p = oracle()();
  NavigationSpec spec;
  spec.displace_at = 3.0;
  const auto r = run_navigation(*p, spec, 3);
  CHECK(r.success);
}

TEST_CASE("benchmark: oracle on every suite, zero policy fails the straight suite") {
  for (auto s : all_suites()) {
    TrackingSpec spec;
    spec.suite = s;
    const auto r = run_benchmark(oracle(), spec, 10, 100);
    CHECK_MESSAGE(r.sr == 1.0, to_string(s));
    CHECK(r.mean_el == 500.0);
  }
  TrackingSpec straight;
  straight.suite = Suite::kStraight;
  const auto zero = run_benchmark([] { return std::make_unique<ConstantPolicy>(); }, straight, 20, 1);
  CHECK(zero.sr == 0.0);
}

TEST_CASE("benchmark is deterministic and writes the CSV contract") {
  TrackingSpec spec;
  spec.suite = Suite::kZigzag;
  std::ostringstream a, b;
  write_benchmark_header(a, 9);
  const auto ra = run_benchmark(oracle(), spec, 5, 9, &a);
  write_benchmark_header(b, 9);
  const auto rb = run_benchmark(oracle(), spec, 5, 9, &b);
  CHECK(a.str() == b.str());
  CHECK(ra.sr == rb.sr);
  CHECK(a.str().rfind("# seed=9\nsuite,seed,EL,success,N_s,T_s\n", 0) == 0);
  for (const auto& e : ra.episodes) {
    CHECK(e.EL >= 1);
    CHECK(e.EL <= 500);
  }
}

TEST_CASE("ablation grid and CSV") {
  CHECK(ablation_grid("table4").size() == 18);
  CHECK(ablation_grid("full").size() == 24);
  CHECK_THROWS_AS(ablation_grid("tiny"), Error);
  std::vector<AblationCell> one{{StatesMode::kFour, true, "person", 4.0}};
  AblationOptions o;
  o.trials = 4;
  std::ostringstream csv;
  const auto rows = run_search_ablation(one, o, &csv);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mean_Ns == 1.0);
  CHECK(csv.str().find("states,gate,difficulty,distance,mean_Ns,mean_Ts") != std::string::npos);
  CHECK(csv.str().find("# seed=1") != std::string::npos);
  CHECK_THROWS_AS(run_search_ablation({}, o), Error);
}

TEST_CASE("raising the dropout multiplier never speeds up the search") {
  AblationOptions o;
  o.trials = 10;
  std::vector<AblationCell> grid;
  for (const char* c : {"person", "chair", "backpack"}) grid.push_back({StatesMode::kFour, false, c, 4.0});
  const auto rows = run_search_ablation(grid, o);
  CHECK(rows[0].mean_Ts <= rows[1].mean_Ts);
  CHECK(rows[1].mean_Ts <= rows[2].mean_Ts);
}

}  // TEST_SUITE
