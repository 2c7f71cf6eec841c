#include <doctest.h>

#include <cmath>
#include <sstream>

#include "navstack/executor.hpp"
#include "navstack/policy.hpp"

using namespace navstack;

namespace {

MissionInstruction instr(const std::string& cls = "person", double v = 0.4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "go to the %s at %.2f m/s", cls.c_str(), v);
  return {buf, cls, v};
}

Detection det(const std::string& cls, double cx, double h) { return {cls, 0.8, cx, 0.5, 0.6 * h, h}; }

const ExecContext& ctx() {
  static const ExecContext c;
  return c;
}

// Random executor state, instruction and detection for the property suite.
struct Case {
  ExecState state;
  MissionInstruction in;
  std::optional<Detection> d;
};

Case random_case(Rng& rng) {
  static const char* classes[] = {"person", "chair", "backpack", "car", "sports ball", "cup"};
  Case c;
  c.state.mode = rng.bernoulli(0.5) ? StatesMode::kFour : StatesMode::kThree;
  c.state.mission = rng.bernoulli(0.3) ? MissionState::kSuccess : MissionState::kRunning;
  c.state.searching = c.state.mission == MissionState::kRunning && rng.bernoulli(0.4);
  c.state.last_seen_side = static_cast<Side>(rng.index(3));
  c.state.search = c.state.last_seen_side == Side::kLeft && c.state.mode == StatesMode::kFour
                       ? SearchState::kSearching0
                       : SearchState::kSearching1;
  const std::string cls = classes[rng.index(6)];
  c.in = instr(cls, 0.05 * (2 + rng.index(19)));
  c.state.prev_instruction = rng.bernoulli(0.8) ? c.in.text : "find the cup at 0.30 m/s";
  const double r = rng.uniform();
  if (r < 0.3) {
    c.d = std::nullopt;
  } else {
    std::string label = cls;
    if (r > 0.9) label = classes[rng.index(6)];
    if (r > 0.97) label = "unicorn";
    c.d = Detection{label, rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
  }
  return c;
}

}  // namespace

TEST_SUITE("executor") {

TEST_CASE("command table") {
  CHECK(resolve_command(ActiveState::kSuccess, 0.4, 0.2) == MotionCommand{0, 0, 0});
  CHECK(resolve_command(ActiveState::kSearching1, 0.4, 0.2) == MotionCommand{0, 0, 0.3});
  CHECK(resolve_command(ActiveState::kSearching0, 0.4, 0.2) == MotionCommand{0, 0, -0.3});
  CHECK(resolve_command(ActiveState::kRunning, 0.4, 0.0) == MotionCommand{0.4, 0, 0});
}

TEST_CASE("heading correction") {
  CHECK(heading_correction(0.5) == 0.0);
  // Positive theta turns right, so a target left of centre gives a negative rate.
  CHECK(heading_correction(0.3, {.k_p = 1.0}) == doctest::Approx(-0.2));
  CHECK(heading_correction(0.0, {.k_p = 2.0, .theta_max = 0.6}) == doctest::Approx(-0.6));
  CHECK(heading_correction(1.0, {.k_p = 2.0, .theta_max = 0.6}) == doctest::Approx(0.6));
}

TEST_CASE("lost target on the left searches left in four-state mode") {
  ExecState s;
  auto in = instr();
  s = step(s, in, det("person", 0.2, 0.3), ctx()).state;
  CHECK(s.last_seen_side == Side::kLeft);
  const auto r = step(s, in, std::nullopt, ctx());
  CHECK(r.state.active() == ActiveState::kSearching0);
  CHECK(r.command == MotionCommand{0, 0, -0.3});
}

TEST_CASE("unknown side and three-state mode search with searching_1") {
  auto in = instr();
  ExecState fresh;
  fresh.prev_instruction = in.text;
  CHECK(step(fresh, in, std::nullopt, ctx()).state.active() == ActiveState::kSearching1);

  ExecState three;
  three.mode = StatesMode::kThree;
  three = step(three, in, det("person", 0.1, 0.3), ctx()).state;
  CHECK(step(three, in, std::nullopt, ctx()).state.active() == ActiveState::kSearching1);
}

TEST_CASE("size threshold reaches success") {
  ExecState s;
  const auto r = step(s, instr(), det("person", 0.5, 0.62), ctx());
  CHECK(r.state.mission == MissionState::kSuccess);
  CHECK(r.command == MotionCommand{0, 0, 0});
  CHECK(r.feedback.state == MissionState::kSuccess);

  const auto below = step(s, instr(), det("person", 0.5, 0.59), ctx());
  CHECK(below.state.mission == MissionState::kRunning);
  CHECK(below.command.v_x == doctest::Approx(0.4));
}

TEST_CASE("new instruction resets after success") {
  ExecState s;
  s = step(s, instr(), det("person", 0.5, 0.7), ctx()).state;
  REQUIRE(s.mission == MissionState::kSuccess);
  const auto r = step(s, instr("chair"), std::nullopt, ctx());
  CHECK(r.state.mission == MissionState::kRunning);
  CHECK(r.state.prev_instruction == instr("chair").text);
}

TEST_CASE("labels outside the lexicon are ignored") {
  ExecState s;
  const auto r = step(s, instr(), det("unicorn", 0.5, 0.9), ctx());
  CHECK(r.ignored_detection);
  CHECK(r.state.mission == MissionState::kRunning);
  CHECK(r.state.active() == ActiveState::kSearching1);
}

TEST_CASE("thresholds") {
  const auto t = ThresholdTable::defaults();
  CHECK(t.at("person") == 0.60);
  CHECK(t.at("chair") == 0.50);
  CHECK(t.at("backpack") == 0.45);
  CHECK(t.at("car") == 0.65);
  CHECK(t.at("sports ball") == 0.40);
  CHECK(t.at("cup") == 0.55);
}

TEST_CASE("trace header") {
  std::ostringstream os;
  TraceWriter w(os, 7);
  w.write(0.0, ActiveState::kRunning, {0.4, 0, 0}, std::nullopt);
  const auto s = os.str();
  CHECK(s.find("seed=7") != std::string::npos);
  CHECK(s.find("t,state,v_x,v_y,theta,det_present,x_n,y_n,w_n,h_n,conf") != std::string::npos);
}

TEST_CASE("learned mode needs a checkpoint") {
  PolicyOptions o;
  o.kind = PolicyKind::kLearned;
  CHECK_THROWS_AS(make_policy(o), Error);
  CHECK_THROWS_AS(parse_policy_kind("telepathy"), Error);
}

TEST_CASE("rule policy without detections searches forever at 0.3 rad/s") {
  RulePolicy p(ExecContext{}, StatesMode::kFour);
  double heading = 0.0;
  const double dt = 1.0 / 15.0;
  for (int t = 1; t <= 600; ++t) {
    const auto tick = p.act(instr(), std::nullopt);
    CHECK((tick.state == ActiveState::kSearching0 || tick.state == ActiveState::kSearching1));
    heading += std::abs(tick.command.theta) * dt;
    if (t % 150 == 0) CHECK(heading == doctest::Approx(0.3 * t * dt));
  }
}

// Criterion 10 runs the same properties in the acceptance binary; here a
// smaller pass keeps the unit suite quick.
TEST_CASE("state machine invariants over random cases") {
  Rng rng(20240607);
  for (int i = 0; i < 100000; ++i) {
    const auto c = random_case(rng);
    const auto r = step(c.state, c.in, c.d, ctx());
    REQUIRE(r.command.v_y == 0.0);
    const auto a = r.state.active();
    if (a == ActiveState::kSearching0 || a == ActiveState::kSearching1) {
      REQUIRE(r.command.v_x == 0.0);
      REQUIRE(std::abs(r.command.theta) == 0.3);
    }
    if (c.state.mode == StatesMode::kThree) REQUIRE(a != ActiveState::kSearching0);
    if (c.state.mission == MissionState::kSuccess && c.state.prev_instruction == c.in.text) {
      REQUIRE(r.state.mission == MissionState::kSuccess);
      REQUIRE(r.command == MotionCommand{0, 0, 0});
    }
    REQUIRE(step(c.state, c.in, c.d, ctx()).state == r.state);
    const double d = rng.uniform(0.0, 0.5);
    REQUIRE(std::abs(heading_correction(0.5 + d) + heading_correction(0.5 - d)) <= 1e-12);
  }
}

}  // TEST_SUITE
