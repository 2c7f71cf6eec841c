// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 1 2 10     a subset
//
// Trained checkpoints are cached in NAVSTACK_CACHE_DIR (or $NAVSTACK_ACCEPTANCE_CACHE)
// and reused only when their recorded training settings match.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "navstack/blur_corpus.hpp"
#include "navstack/datagen.hpp"
#include "navstack/executor.hpp"
#include "navstack/l2mm.hpp"
#include "navstack/nn.hpp"
#include "navstack/policy.hpp"
#include "navstack/sim.hpp"

namespace fs = std::filesystem;
using namespace navstack;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

fs::path cache_dir() {
  if (const char* e = std::getenv("NAVSTACK_ACCEPTANCE_CACHE")) return e;
  return NAVSTACK_CACHE_DIR;
}

const ClassLexicon& lex() { return ClassLexicon::standard(); }

const TokenVocab& vocab() {
  static const TokenVocab v = TokenVocab::build(lex());
  return v;
}

std::vector<std::string> lines(std::size_t n, std::uint64_t seed) {
  DatagenOptions o;
  o.n = n;
  o.seed = seed;
  return generate_lines(o, lex());
}

std::vector<TrainSample> parse(const std::vector<std::string>& ls) {
  std::vector<TrainSample> out;
  out.reserve(ls.size());
  for (const auto& l : ls) out.push_back(sample_from_json(nlohmann::json::parse(l)));
  return out;
}

// Fresh samples whose lines never occur in the training corpus.
std::vector<TrainSample> held_out(const std::vector<std::string>& train, std::size_t n, std::uint64_t seed) {
  std::unordered_set<std::uint64_t> seen;
  for (const auto& l : train) seen.insert(fnv1a64(l));
  std::vector<std::string> keep;
  for (const auto& l : lines(n, seed))
    if (!seen.count(fnv1a64(l))) keep.push_back(l);
  return parse(keep);
}

struct Run {
  std::string name;
  std::size_t n = 0;
  std::uint64_t data_seed = 1;
  int epochs = 25;
  double beta = 10.0;
  bool separators = true;
};

bool matches(const Checkpoint& c, const Run& r, const TrainOptions& o) {
  const auto& m = c.metadata;
  auto eq = [&](const char* k, const nlohmann::json& v) { return m.contains(k) && m.at(k) == v; };
  if (c.kind != "l2mm" || c.config.preset != "small" || c.config.separators != r.separators) return false;
  if (!(c.vocab == vocab())) return false;
  if (m.contains("corpus") &&
      m.at("corpus") != "generated n=" + std::to_string(r.n) + " seed=" + std::to_string(r.data_seed))
    return false;
  return eq("samples", r.n) && eq("seed", r.data_seed) && eq("epochs", r.epochs) && eq("beta", r.beta) &&
         eq("lr", o.lr) && eq("batch_size", o.batch_size);
}

// Trains (or loads from cache) a small-preset checkpoint.
Checkpoint trained(const Run& r, const std::vector<std::string>& train_lines) {
  TrainOptions o;  // lr 1e-4, batch 512, AdamW wd 0.01, 4:1 split
  o.epochs = r.epochs;
  o.beta = r.beta;
  o.seed = r.data_seed;
  const fs::path path = cache_dir() / (r.name + ".ckpt");
  if (fs::exists(path)) {
    try {
      auto c = load_checkpoint(path);
      if (matches(c, r, o)) {
        std::cerr << "  using cached " << path << '\n';
        return c;
      }
      std::cerr << "  cached " << path << " has other settings, retraining\n";
    } catch (const std::exception& e) {
      std::cerr << "  cached " << path << " unreadable (" << e.what() << "), retraining\n";
    }
  }
  fs::create_directories(cache_dir());
  std::ofstream log(path.string() + ".log.csv");
  log << "# seed=" << r.data_seed << '\n';
  o.log_csv = &log;
  o.progress = [&](const std::string& m) { std::cerr << "  [" << r.name << "] " << m << '\n'; };
  L2MMConfig cfg = preset_config("small");
  cfg.separators = r.separators;
  const auto t0 = Clock::now();
  auto c = train_l2mm(parse(train_lines), cfg, o, vocab());
  c.metadata["seed"] = r.data_seed;
  c.metadata["corpus"] = "generated n=" + std::to_string(r.n) + " seed=" + std::to_string(r.data_seed);
  c.metadata["train_seconds"] = seconds_since(t0);
  save_checkpoint(path, c);
  return c;
}

struct ModelReport {
  StateAccuracy acc;
  SpeedMetrics speed;
};

ModelReport report(const Checkpoint& c, const std::vector<TrainSample>& eval, std::uint64_t speed_seed) {
  L2MM m(c);
  ModelReport r;
  r.acc = evaluate_states(m, eval);
  r.speed = eval_speed_metrics(m, speed_eval_set(2000, speed_seed, 0.40, lex(), ExecContext{}), 0.40);
  std::cerr << "  joint acc " << r.acc.joint << " (n " << r.acc.n << "), sigma_v " << r.speed.sigma_v
            << ", eps_v " << r.speed.eps_v << '\n';
  return r;
}

// ------------------------------------------------------------------ criteria

Verdict c1() {
  const double m = nn::motion_loss({{0.5, 0, 0}}, {{0.4, 0, 0}}, 10.0);
  const double s = nn::state_loss({0.5, 0.5}, 0);
  const double s1 = nn::state_loss({0.5, 0.5}, 1);
  const bool ok = std::abs(m - 0.1) <= 1e-9 && std::abs(s - std::log(2.0)) <= 1e-9 &&
                  std::abs(s1 - std::log(2.0)) <= 1e-9;
  return {ok, fmt("motion_loss %.12f, state_loss %.12f", m, s)};
}

Verdict c2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto model = tiny_double_model(vocab(), seed);
    const auto g = grad_check(model, make_batch(parse(lines(6, seed)), vocab(), true), 10.0, 1e-5, 600, seed);
    worst = std::max(worst, g.max_rel_error);
    checked += g.checked;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0,
          fmt("max rel error %.3g over %.0f parameters in %.1f s", worst, static_cast<double>(checked), secs)};
}

const Run kMain{"c3_small_n200000_s1_e25_b10_sep", 200000, 1, 25, 10.0, true};

Checkpoint& main_checkpoint() {
  static Checkpoint c = trained(kMain, lines(kMain.n, kMain.data_seed));
  return c;
}

Verdict c3() {
  const auto t0 = Clock::now();
  const auto train = lines(kMain.n, kMain.data_seed);
  const auto& c = main_checkpoint();
  const auto eval = held_out(train, 20000, 1001);
  const auto r = report(c, eval, 1003);
  const bool ok = r.acc.joint >= 0.99 && r.speed.eps_v <= 0.06 && r.speed.sigma_v <= 0.02;
  return {ok, fmt("held-out state acc %.4f, eps_v %.4f, sigma_v %.4f at 0.40 m/s (%.0f s)", r.acc.joint,
                  r.speed.eps_v, r.speed.sigma_v, seconds_since(t0))};
}

// Criteria 4 and 5 share one budget: 40k samples, 10 epochs, small preset.
constexpr std::size_t kAblN = 40000;
constexpr int kAblEpochs = 10;

ModelReport ablation_run(const std::string& name, double beta, bool sep) {
  static std::map<std::string, ModelReport> done;
  if (auto it = done.find(name); it != done.end()) return it->second;
  const auto train = lines(kAblN, 2);
  const Run r{name, kAblN, 2, kAblEpochs, beta, sep};
  const auto rep = report(trained(r, train), held_out(train, 20000, 1002), 1004);
  done[name] = rep;
  return rep;
}

Verdict c4() {
  const auto with = ablation_run("abl_n40000_e10_b10_sep", 10.0, true);
  const auto without = ablation_run("abl_n40000_e10_b10_nosep", 10.0, false);
  return {without.speed.eps_v > with.speed.eps_v,
          fmt("eps_v no-[SEP] %.4f vs [SEP] %.4f", without.speed.eps_v, with.speed.eps_v)};
}

Verdict c5() {
  const auto b1 = ablation_run("abl_n40000_e10_b1_sep", 1.0, true);
  const auto b10 = ablation_run("abl_n40000_e10_b10_sep", 10.0, true);
  const auto b20 = ablation_run("abl_n40000_e10_b20_sep", 20.0, true);
  const bool ok = b1.speed.eps_v > b10.speed.eps_v && b20.acc.joint < b10.acc.joint;
  return {ok, fmt("eps_v beta1 %.4f vs beta10 %.4f; state acc beta20 %.4f vs beta10 %.4f", b1.speed.eps_v,
                  b10.speed.eps_v, b20.acc.joint, b10.acc.joint)};
}

Verdict c6() {
  const auto t0 = Clock::now();
  std::ostringstream msg;
  bool ok = true;
  PolicyOptions oracle;
  PolicyOptions learned;
  learned.kind = PolicyKind::kLearned;
  learned.model = std::make_shared<L2MM>(main_checkpoint());
  for (auto suite : sim::all_suites()) {
    sim::TrackingSpec spec;
    spec.suite = suite;
    const auto o = sim::run_benchmark(policy_factory(oracle), spec, 100, 1);
    const auto l = sim::run_benchmark(policy_factory(learned), spec, 100, 1);
    ok = ok && o.sr == 1.0 && o.mean_el == 500.0 && l.sr >= 0.95 && l.mean_el >= 490.0;
    msg << sim::to_string(suite) << " oracle " << o.mean_el << "/" << o.sr << " learned " << l.mean_el << "/"
        << l.sr << "; ";
  }
  msg << fmt("(%.0f s)", seconds_since(t0));
  return {ok, msg.str()};
}

Verdict c7() {
  const auto t0 = Clock::now();
  sim::AblationOptions o;
  o.trials = 60;
  o.base_seed = 1;
  const auto rows = sim::run_search_ablation(sim::ablation_grid("table4"), o);
  auto find = [&](StatesMode m, bool gate, const std::string& cls, double dist) -> const sim::AblationRow& {
    for (const auto& r : rows)
      if (r.cell.mode == m && r.cell.gate == gate && r.cell.cls == cls && r.cell.distance == dist) return r;
    throw Error("missing ablation cell");
  };
  bool ok = true;
  std::ostringstream msg;
  for (double d : {4.0, 6.0}) {
    for (bool gate : {false, true}) {
      if (!gate) ok = ok && find(StatesMode::kThree, false, "person", d).mean_Ns == 1.0;
      ok = ok && find(StatesMode::kFour, gate, "person", d).mean_Ns == 1.0;
    }
    for (const std::string cls : {"person", "chair", "backpack"})
      ok = ok && find(StatesMode::kFour, true, cls, d).mean_Ns == 1.0;
    const double a = find(StatesMode::kThree, false, "backpack", d).mean_Ts;
    const double b = find(StatesMode::kFour, false, "backpack", d).mean_Ts;
    const double c = find(StatesMode::kFour, true, "backpack", d).mean_Ts;
    ok = ok && a > b && b > c;
    msg << fmt("backpack %.0f m T_s %.2f > %.2f > %.2f; ", d, a, b, c);
  }
  msg << fmt("(%.0f s)", seconds_since(t0));
  return {ok, msg.str()};
}

Verdict c8() {
  BlurStreamOptions o;
  o.count = 2000;
  o.blur_fraction = 0.3;
  const auto stream = generate_blur_stream(o, 8);
  const auto r = evaluate_blur_threshold(stream, 150.0);
  const double gain = r.qualified_gated - r.qualified_ungated;
  const bool ok = r.recall >= 0.99 && r.precision >= 0.99 && gain >= o.blur_fraction - 1e-9;
  return {ok, fmt("recall %.4f, precision %.4f, qualified %.4f -> %.4f", r.recall, r.precision,
                  r.qualified_ungated, r.qualified_gated)};
}

std::uint64_t file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

Verdict c9() {
  const fs::path dir = cache_dir() / "datagen_1m";
  fs::create_directories(dir);
  DatagenOptions o;
  o.n = 1000000;
  o.seed = 1;
  const auto t0 = Clock::now();
  const auto stats = generate_dataset(o, lex(), dir / "a.jsonl");
  const double secs = seconds_since(t0);
  const auto rep = replay_corpus(dir / "a.jsonl", ExecContext{});
  generate_dataset(o, lex(), dir / "b.jsonl");
  const bool same = fs::file_size(dir / "a.jsonl") == fs::file_size(dir / "b.jsonl") &&
                    file_hash(dir / "a.jsonl") == file_hash(dir / "b.jsonl");
  fs::remove_all(dir);
  const bool ok = secs < 900.0 && rep.checked == o.n && rep.mismatches == 0 && same && stats.n == o.n;
  return {ok, fmt("1M samples in %.1f s, replay mismatches %.0f of %.0f, regeneration identical: ", secs,
                  static_cast<double>(rep.mismatches), static_cast<double>(rep.checked)) +
                  (same ? "yes" : "no")};
}

Verdict c10() {
  const ExecContext ctx;
  static const char* classes[] = {"person", "chair", "backpack", "car", "sports ball", "cup", "tv"};
  Rng rng(10);
  std::size_t cases = 0, bad = 0;
  for (int i = 0; i < 200000; ++i) {
    ExecState s;
    s.mode = rng.bernoulli(0.5) ? StatesMode::kFour : StatesMode::kThree;
    const std::string cls = classes[rng.index(7)];
    const double v = 0.05 * static_cast<double>(2 + rng.index(19));
    char text[96];
    std::snprintf(text, sizeof text, "go to the %s at %.2f m/s", cls.c_str(), v);
    const MissionInstruction in{text, cls, v};
    // A random walk of ticks under one instruction from a random start.
    for (int k = 0; k < 8; ++k) {
      std::optional<Detection> d;
      const double u = rng.uniform();
      if (u > 0.35) {
        std::string label = u > 0.93 ? classes[rng.index(7)] : cls;
        if (u > 0.98) label = "unicorn";
        d = Detection{label, rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
      }
      const auto r = step(s, in, d, ctx);
      const auto a = r.state.active();
      ++cases;
      bool ok = r.command.v_y == 0.0;
      if (a == ActiveState::kSearching0 || a == ActiveState::kSearching1)
        ok = ok && r.command.v_x == 0.0 && std::abs(r.command.theta) == 0.3;
      if (s.mission == MissionState::kSuccess && s.prev_instruction == in.text)
        ok = ok && r.state.mission == MissionState::kSuccess && r.command == MotionCommand{};
      if (s.mode == StatesMode::kThree) ok = ok && a != ActiveState::kSearching0;
      const double x = rng.uniform(0.0, 0.5);
      ok = ok && std::abs(heading_correction(0.5 + x) + heading_correction(0.5 - x)) <= 1e-12;
      bad += !ok;
      s = r.state;
    }
  }
  return {bad == 0 && cases >= 100000,
          fmt("%.0f randomized ticks, %.0f violations", static_cast<double>(cases), static_cast<double>(bad))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> all = {c1, c2, c3, c4, c5, c6, c7, c8, c9, c10};
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  bool all_ok = true;
  for (int k = 1; k <= static_cast<int>(all.size()); ++k) {
    if (!pick.empty() && !pick.count(k)) continue;
    Verdict v;
    try {
      v = all[static_cast<std::size_t>(k - 1)]();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    all_ok = all_ok && v.pass;
    std::cout << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << std::endl;
  }
  return all_ok ? 0 : 2;
}
