#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "navstack/datagen.hpp"
#include "navstack/planner.hpp"

using namespace navstack;
using namespace std::chrono_literals;

namespace {

const ClassLexicon& lex() { return ClassLexicon::standard(); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Scenario running_chair(double cx, double speed) {
  Scenario s;
  s.kind = ScenarioKind::kRunning;
  s.target_class = "chair";
  s.speed = speed;
  s.input.curr_instruction = "go to the chair at 0.40 m/s";
  s.input.prev_instruction = s.input.curr_instruction;
  s.input.detection = Detection{"chair", 0.8, cx, 0.5, 0.2, 0.3};
  return s;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("static synonyms") {
  const auto e = expand_synonyms(lex());
  const auto& chair = e.table.synonyms("chair");
  CHECK(std::find(chair.begin(), chair.end(), "seat") != chair.end());
}

TEST_CASE("bridge synonyms: dedup and collision rejection") {
  auto bridge = connect_bridge(std::string("exec:") + NAVSTACK_FAKE_BRIDGE + " synonyms");
  const auto e = expand_synonyms(lex(), bridge.get(), 1, 5s);
  // Every class re-offers its own name: a duplicate, never an addition.
  CHECK(e.duplicates >= lex().size());
  CHECK(e.added == lex().size());
  REQUIRE(e.rejected.size() == 1);
  CHECK(e.rejected[0].find("seat") != std::string::npos);
  CHECK(e.table.owner("seat") == std::optional<std::string>("chair"));
  CHECK(e.table.owner("fake backpack") == std::optional<std::string>("backpack"));
}

TEST_CASE("instruction variation is seeded and parseable") {
  Rng a(7), b(7);
  CHECK(vary_instruction(lex(), "chair", 0.40, a) == vary_instruction(lex(), "chair", 0.40, b));

  Rng rng(1);
  for (int i = 0; i < 20000; ++i) {
    const auto& cls = lex().classes()[rng.index(lex().size())];
    const auto grid = speed_grid();
    const double v = grid[rng.index(grid.size())];
    const auto text = vary_instruction(lex(), cls, v, rng);
    const auto m = parse_instruction(text, lex());
    REQUIRE(m.target_class == cls);
    REQUIRE(m.speed == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("at least 50 surface forms per class") {
  Rng rng(3);
  for (const std::string cls : {"chair", "person", "backpack", "sports ball"}) {
    std::set<std::string> forms;
    for (int i = 0; i < 10000; ++i) forms.insert(vary_instruction(lex(), cls, 0.40, rng));
    CHECK(forms.size() >= 50);
  }
}

TEST_CASE("tasks round trip through the planner") {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    std::vector<std::pair<std::string, double>> steps;
    const auto n = 1 + rng.index(4);
    for (std::size_t k = 0; k < n; ++k)
      steps.emplace_back(lex().classes()[rng.index(lex().size())], speed_grid()[rng.index(19)]);
    const auto plan = plan_template({vary_task(lex(), steps, rng)}, lex());
    REQUIRE(plan.size() == n);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(plan[k].target_class == steps[k].first);
      CHECK(plan[k].speed == doctest::Approx(steps[k].second));
    }
  }
}

TEST_CASE("threshold generation") {
  const auto t = generate_thresholds({{"person", 0.60}}, lex());
  CHECK(t.at("person") == doctest::Approx(0.60));
  REQUIRE(lex().size_category("chair") == lex().size_category("person"));
  CHECK(t.at("chair") == doctest::Approx(0.60));
  for (const auto& c : lex().classes()) {
    CHECK(t.at(c) > 0.0);
    CHECK(t.at(c) < 1.0);
  }
  CHECK_THROWS_AS(generate_thresholds({}, lex()), Error);
}

TEST_CASE("oracle labels") {
  ExecContext ctx;
  const auto run = oracle_label(running_chair(0.5, 0.4), ctx);
  CHECK(run.motion == MotionCommand{0.4, 0, 0});
  CHECK(run.mission == MissionState::kRunning);

  Scenario lost = running_chair(0.5, 0.4);
  lost.kind = ScenarioKind::kSearching;
  lost.input.detection.reset();
  lost.input.search = SearchState::kSearching1;  // last side right
  const auto s = oracle_label(lost, ctx);
  CHECK(s.search == SearchState::kSearching1);
  CHECK(s.motion == MotionCommand{0, 0, 0.3});

  Scenario near = running_chair(0.5, 0.4);
  near.target_class = "person";
  near.input.curr_instruction = near.input.prev_instruction = "go to the person at 0.40 m/s";
  near.input.detection = Detection{"person", 0.9, 0.5, 0.5, 0.42, 0.70};
  const auto ok = oracle_label(near, ctx);
  CHECK(ok.mission == MissionState::kSuccess);
  CHECK(ok.motion == MotionCommand{0, 0, 0});
}

TEST_CASE("json line schema and round trip") {
  DatagenOptions o;
  o.n = 300;
  o.seed = 4;
  for (const auto& line : generate_lines(o, lex())) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"im0", "im1", "obj", "conf", "cx", "cy", "w", "h", "sm", "ss", "target"}) REQUIRE(j.contains(k));
    REQUIRE(j["target"]["v"].size() == 3);
    for (const char* k : {"conf", "cx", "cy", "w", "h"}) {
      CHECK(j[k].get<double>() >= 0.0);
      CHECK(j[k].get<double>() <= 1.0);
    }
    CHECK(sample_line(sample_from_json(j)) == line);
  }
}

TEST_CASE("generation is deterministic, deduplicated, balanced and replays cleanly") {
  const auto dir = std::filesystem::temp_directory_path() / "navstack_datagen_test";
  std::filesystem::create_directories(dir);
  DatagenOptions o;
  o.n = 100000;
  o.seed = 21;
  o.threads = 1;
  const auto stats = generate_dataset(o, lex(), dir / "a.jsonl");
  o.threads = 4;
  generate_dataset(o, lex(), dir / "b.jsonl");
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(std::filesystem::exists(dir / "a.jsonl.stats.json"));

  std::ifstream in(dir / "a.jsonl");
  std::set<std::string> lines;
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    lines.insert(line);
    ++count;
  }
  CHECK(count == 100000);
  CHECK(lines.size() == count);

  const double floor = 0.5 / static_cast<double>(lex().size()) * static_cast<double>(o.n);
  for (const auto& c : lex().classes()) CHECK(static_cast<double>(stats.class_counts.at(c)) >= floor);

  const auto rep = replay_corpus(dir / "a.jsonl", ExecContext{});
  CHECK(rep.checked == 100000);
  CHECK(rep.mismatches == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("replay catches a corrupted target") {
  DatagenOptions o;
  o.n = 200;
  o.seed = 2;
  std::vector<TrainSample> s;
  for (const auto& l : generate_lines(o, lex())) s.push_back(sample_from_json(nlohmann::json::parse(l)));
  s[17].motion.theta += 0.1;
  const auto r = replay_samples(s, ExecContext{});
  CHECK(r.mismatches == 1);
  CHECK(r.first_bad_line == 18);
}

TEST_CASE("unwritable output path") {
  DatagenOptions o;
  o.n = 10;
  CHECK_THROWS(generate_dataset(o, lex(), "/nonexistent_dir/x/y.jsonl"));
}

TEST_CASE("scenario mix must sum to one") {
  ScenarioMix m;
  m.running = 0.9;
  CHECK_THROWS_AS(m.validate(), Error);
  ScenarioMix{}.validate();
}

}  // TEST_SUITE
