#include "navstack/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "navstack/blur_corpus.hpp"
#include "navstack/datagen.hpp"
#include "navstack/image_io.hpp"
#include "navstack/ioe.hpp"
#include "navstack/l2mm.hpp"

namespace navstack::harness {

std::size_t MissionSummary::succeeded() const {
  return static_cast<std::size_t>(
      std::count_if(subtasks.begin(), subtasks.end(), [](const auto& s) { return s.success; }));
}

nlohmann::json MissionSummary::to_json() const {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : subtasks) {
    subs.push_back({{"text", s.instruction.text},
                    {"object", s.instruction.target_class},
                    {"speed", s.instruction.speed},
                    {"success", s.success},
                    {"seconds", s.seconds},
                    {"ticks", s.ticks}});
  }
  return {{"seed", seed},
          {"task", task},
          {"mode", mode},
          {"planner_fallback", planner_fallback},
          {"warnings", warnings},
          {"subtasks", subs},
          {"succeeded", succeeded()},
          {"total", subtasks.size()}};
}

namespace {

std::vector<MissionInstruction> plan_or_throw(const std::string& task, Planner& planner,
                                              MissionSummary& summary) {
  LongHorizonTask t;
  t.text = task;
  auto plan = planner.plan(t);
  summary.planner_fallback = planner.used_fallback();
  summary.warnings = planner.warnings();
  if (plan.empty()) throw PlanningError("task produced no subtasks");
  return plan;
}

}  // namespace

MissionSummary run_mission_sim(const std::string& task, Planner& planner, Policy& policy,
                               const MissionOptions& opts, TraceWriter* trace) {
  MissionSummary summary;
  summary.seed = opts.seed;
  summary.task = task;
  summary.mode = "sim";
  const auto plan = plan_or_throw(task, planner, summary);

  // Each object sits 3-5 m from the previous one so it stays within sensing
  // range of wherever the tracker stopped.
  Rng rng(Rng::derive(opts.seed, 0x3A1D));
  sim::World world;
  sim::Pose anchor;
  std::set<std::string> placed;
  for (const auto& step : plan) {
    if (!placed.insert(step.target_class).second) continue;
    anchor.heading = rng.uniform(-sim::kPi, sim::kPi);
    const double d = rng.uniform(3.0, 5.0);
    sim::Pose p{anchor.x + d * std::cos(anchor.heading), anchor.y - d * std::sin(anchor.heading), 0.0};
    world.targets.push_back({step.target_class, p, 0.0});
    anchor = p;
  }
  world.clamp();

  sim::SimPerception perception(opts.detector, {}, opts.gate, opts.seed, opts.blur_threshold);
  policy.reset();
  const auto max_ticks = static_cast<std::size_t>(std::llround(opts.max_seconds / sim::kDt));
  std::size_t t = 0;
  MotionCommand last;
  std::optional<std::size_t> index = 0;
  while (index) {
    const auto& instr = plan[*index];
    SubtaskOutcome out;
    out.instruction = instr;
    for (std::size_t k = 0; k < max_ticks; ++k, ++t) {
      const auto det = perception.sense(world, instr.target_class, last);
      const auto tick = policy.act(instr, det, *index);
      if (trace) trace->write(t * sim::kDt, tick.state, tick.command, tick.detection);
      last = tick.command;
      sim::step_world(world, last, nullptr, t);
      ++out.ticks;
      if (tick.feedback.state == MissionState::kSuccess) {
        out.success = true;
        ++t;
        break;
      }
    }
    out.seconds = out.ticks * sim::kDt;
    summary.subtasks.push_back(out);
    if (!out.success && !opts.continue_on_failure) break;
    index = *index + 1 < plan.size() ? std::optional<std::size_t>(*index + 1) : std::nullopt;
  }
  return summary;
}

std::optional<Detection> parse_detector_response(const nlohmann::json& response,
                                                 const std::string& cls) {
  if (!response.is_object() || !response.contains("detections") ||
      !response["detections"].is_array()) {
    throw BridgeError("detector response lacks a 'detections' array");
  }
  std::optional<Detection> best;
  try {
    for (const auto& d : response["detections"]) {
      Detection det;
      det.label = d.at("label").get<std::string>();
      det.confidence = d.at("conf").get<double>();
      det.cx = d.at("cx").get<double>();
      det.cy = d.at("cy").get<double>();
      det.w = d.at("w").get<double>();
      det.h = d.at("h").get<double>();
      if (!det.valid()) throw BridgeError("detector returned values outside [0, 1]");
      if (det.label != cls) continue;
      if (!best || det.confidence > best->confidence) best = det;
    }
  } catch (const nlohmann::json::exception& e) {
    throw BridgeError(std::string("malformed detection: ") + e.what());
  }
  return best;
}

MissionSummary run_mission_live(const std::string& task, Planner& planner, Policy& policy,
                                JsonLineTransport& detector,
                                const std::vector<std::filesystem::path>& frames,
                                const MissionOptions& opts, TraceWriter* trace) {
  if (frames.empty()) throw UsageError("live mode needs at least one frame");
  MissionSummary summary;
  summary.seed = opts.seed;
  summary.task = task;
  summary.mode = "live";
  const auto plan = plan_or_throw(task, planner, summary);

  FrameGate gate(opts.blur_threshold);
  policy.reset();
  std::size_t frame = 0;
  std::size_t index = 0;
  std::filesystem::path clear_path;
  const auto max_ticks = static_cast<std::size_t>(std::llround(opts.max_seconds / sim::kDt));
  for (; index < plan.size(); ++index) {
    const auto& instr = plan[index];
    SubtaskOutcome out;
    out.instruction = instr;
    for (std::size_t k = 0; k < max_ticks && frame < frames.size(); ++k, ++frame) {
      const auto raw = read_ppm(frames[frame]);
      const auto g = gate.gate(raw);
      if (!g.was_blurred || g.pass_through) clear_path = frames[frame];
      const nlohmann::json req = {{"class", instr.target_class},
                                  {"frame_id", frame},
                                  {"frame", std::filesystem::absolute(clear_path).string()}};
      const auto det = parse_detector_response(detector.request(req, std::chrono::seconds(10)),
                                               instr.target_class);
      const auto tick = policy.act(instr, det, index);
      if (trace) trace->write(frame * sim::kDt, tick.state, tick.command, tick.detection);
      ++out.ticks;
      if (tick.feedback.state == MissionState::kSuccess) {
        out.success = true;
        ++frame;
        break;
      }
    }
    out.seconds = out.ticks * sim::kDt;
    summary.subtasks.push_back(out);
    if (!out.success && !opts.continue_on_failure) break;
  }
  return summary;
}

namespace {

/// JSON config: top-level keys are global options, nested objects are
/// subcommand sections, e.g. {"seed": 3, "train": {"epochs": 5}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        j[name] = opt->as<std::string>();
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    walk(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void walk(const nlohmann::json& j, std::vector<std::string> parents,
                   std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        walk(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

std::string env_or(const std::string& flag, const char* env) {
  if (!flag.empty()) return flag;
  const char* v = std::getenv(env);
  return v ? std::string(v) : std::string();
}

/// Artifact sink: the named file, or stdout when no path is given.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
      }
      file_.open(path);
      if (!file_) throw Error("cannot write " + path);
    }
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

ClassLexicon load_lexicon(const std::string& synonyms_path) {
  if (synonyms_path.empty()) return ClassLexicon::standard();
  std::ifstream in(synonyms_path);
  if (!in) throw UsageError("cannot open synonym table " + synonyms_path);
  const auto j = nlohmann::json::parse(in);
  SynonymTable table = ClassLexicon::standard().synonyms();
  for (const auto& [cls, syns] : j.items()) {
    for (const auto& s : syns) table.add(cls, s.get<std::string>());
  }
  return with_synonyms(ClassLexicon::standard(), std::move(table));
}

std::vector<TrainSample> parse_lines(const std::vector<std::string>& lines) {
  std::vector<TrainSample> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(sample_from_json(nlohmann::json::parse(l)));
  return out;
}

ExecContext make_context(const ClassLexicon& lexicon, double k_p, double theta_max) {
  ExecContext ctx;
  ctx.lexicon = &lexicon;
  ctx.gains.k_p = k_p;
  ctx.gains.theta_max = theta_max;
  ctx.gains.validate();
  return ctx;
}

std::vector<double> parse_threshold_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad threshold '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("threshold list is empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(prec);
  o << v;
  return o.str();
}

// ---------------------------------------------------------------- datagen

struct DatagenArgs {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t shards = 8;
  unsigned threads = 0;
  int synonym_rounds = 0;
  std::string synonyms_out;
  std::string llm_bridge;
  std::string threshold_seeds;
  bool replay = false;
};

int cmd_datagen(const DatagenArgs& a) {
  if (a.n == 0) throw UsageError("--n must be at least 1");
  ClassLexicon lexicon = ClassLexicon::standard();
  if (a.synonym_rounds > 0) {
    const auto endpoint = env_or(a.llm_bridge, kLlmBridgeEnv);
    if (endpoint.empty()) throw UsageError("--synonym-rounds needs an LLM bridge endpoint");
    auto bridge = connect_bridge(endpoint);
    auto exp = expand_synonyms(lexicon, bridge.get(), a.synonym_rounds);
    for (const auto& r : exp.rejected) std::cerr << "warning: " << r << '\n';
    std::cerr << "synonyms: " << exp.added << " added, " << exp.duplicates << " duplicates, "
              << exp.rejected.size() << " rejected\n";
    lexicon = with_synonyms(lexicon, exp.table);
    if (!a.synonyms_out.empty()) {
      std::ofstream f(a.synonyms_out);
      f << nlohmann::json(exp.table.entries()).dump(2) << '\n';
    }
  }
  if (const auto parent = std::filesystem::path(a.out).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  DatagenOptions o;
  o.n = a.n;
  o.seed = a.seed;
  o.shards = a.shards;
  o.threads = a.threads;
  if (!a.threshold_seeds.empty()) {
    std::ifstream in(a.threshold_seeds);
    if (!in) throw UsageError("cannot open " + a.threshold_seeds);
    o.thresholds = generate_thresholds(nlohmann::json::parse(in).get<std::map<std::string, double>>(),
                                       lexicon);
  }
  const auto stats = generate_dataset(o, lexicon, a.out);
  std::cout << "datagen: " << stats.n << " samples -> " << a.out << " in " << fmt(stats.seconds, 2)
            << " s (" << fmt(stats.n / std::max(stats.seconds, 1e-9), 0) << " samples/s), "
            << stats.duplicates_dropped << " duplicates redrawn, seed " << a.seed << '\n';
  if (a.replay) {
    ExecContext ctx;
    ctx.lexicon = &lexicon;
    ctx.thresholds = o.thresholds;
    const auto r = replay_corpus(a.out, ctx);
    std::cout << "replay: " << r.checked << " checked, " << r.mismatches << " mismatches\n";
    if (r.mismatches) {
      std::cerr << "first mismatch at line " << r.first_bad_line << ": " << r.first_diff << '\n';
      return kExitPostCondition;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::size_t n = 0;
  std::size_t limit = 0;
  std::uint64_t seed = 0;
  std::string preset = "small";
  int epochs = 25;
  int batch = 512;
  double lr = 1e-4;
  double wd = 0.01;
  double beta = 10.0;
  double val_fraction = 0.2;
  std::optional<double> dropout;
  bool no_sep = false;
  std::string out;
  std::string log;
  std::string synonyms;
};

std::vector<TrainSample> training_samples(const std::string& data, std::size_t n, std::size_t limit,
                                          std::uint64_t seed, const ClassLexicon& lexicon) {
  if (!data.empty()) return read_corpus(data, limit);
  if (n == 0) throw UsageError("give --data or --n");
  DatagenOptions o;
  o.n = n;
  o.seed = seed;
  return parse_lines(generate_lines(o, lexicon));
}

TrainOptions train_options(const TrainArgs& a, std::ostream* log) {
  if (!(a.beta > 0.0)) throw UsageError("--beta must be positive");
  if (a.epochs < 1) throw UsageError("--epochs must be at least 1");
  if (a.batch < 1) throw UsageError("--batch must be at least 1");
  if (!(a.lr > 0.0)) throw UsageError("--lr must be positive");
  if (!(a.val_fraction > 0.0 && a.val_fraction < 1.0)) throw UsageError("--val-fraction must be in (0, 1)");
  TrainOptions o;
  o.epochs = a.epochs;
  o.batch_size = a.batch;
  o.lr = a.lr;
  o.weight_decay = a.wd;
  o.beta = a.beta;
  o.val_fraction = a.val_fraction;
  o.seed = a.seed;
  o.log_csv = log;
  o.progress = [](const std::string& m) { std::cerr << m << '\n'; };
  return o;
}

int cmd_train(const TrainArgs& a) {
  const auto lexicon = load_lexicon(a.synonyms);
  L2MMConfig cfg = preset_config(a.preset);
  cfg.separators = !a.no_sep;
  if (a.dropout) cfg.dropout = *a.dropout;
  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  std::ofstream log(log_path);
  if (!log) throw Error("cannot write " + log_path);
  log << "# seed=" << a.seed << '\n';
  const auto opts = train_options(a, &log);
  const auto samples = training_samples(a.data, a.n, a.limit, a.seed, lexicon);
  if (samples.size() < 5) throw UsageError("need at least 5 training samples");
  TrainResult r;
  auto ckpt = train_l2mm(samples, cfg, opts, TokenVocab::build(lexicon), &r);
  ckpt.metadata["seed"] = a.seed;
  ckpt.metadata["corpus"] = a.data.empty() ? "generated n=" + std::to_string(a.n) + " seed=" + std::to_string(a.seed)
                                           : "file " + a.data;
  save_checkpoint(a.out, ckpt);
  std::cout << "train: preset " << cfg.preset << (cfg.separators ? "" : " (no [SEP])") << ", beta "
            << a.beta << ", " << samples.size() << " samples, best epoch " << r.best_epoch
            << ", val loss " << fmt(r.best_val_loss, 6) << ", val state acc "
            << fmt(r.best_val_acc, 4) << " -> " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- ioe-train

struct IoeArgs {
  std::size_t n = 20000;
  std::uint64_t seed = 0;
  int epochs = 10;
  int batch = 256;
  double lr = 1e-3;
  std::string out;
  std::string log;
  std::size_t eval_n = 2000;
};

int cmd_ioe_train(const IoeArgs& a) {
  if (a.n < 5) throw UsageError("--n must be at least 5");
  const auto& lexicon = ClassLexicon::standard();
  const auto texts = instruction_corpus(a.n, a.seed, lexicon);
  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  std::ofstream log(log_path);
  if (!log) throw Error("cannot write " + log_path);
  log << "# seed=" << a.seed << '\n';
  TrainArgs t;
  t.epochs = a.epochs;
  t.batch = a.batch;
  t.lr = a.lr;
  t.seed = a.seed;
  auto opts = train_options(t, &log);
  TrainResult r;
  auto ckpt = train_ioe(texts, lexicon, TokenVocab::build(lexicon), IOEConfig{}, opts, &r);
  save_checkpoint(a.out, ckpt);
  const TrainedExtractor learned(ckpt);
  const LookupExtractor lookup(lexicon);
  const auto held_out = instruction_corpus(a.eval_n, a.seed ^ 0x9E3779B97F4A7C15ULL, lexicon);
  const double agree = extractor_agreement(learned, lookup, held_out);
  std::cout << "ioe-train: " << texts.size() << " texts, val acc " << fmt(r.best_val_acc, 4)
            << ", agreement with lookup on " << held_out.size() << " fresh texts " << fmt(agree, 4)
            << " -> " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::size_t n = 20000;
  std::size_t speed_n = 2000;
  double speed = 0.40;
  std::uint64_t seed = 7;
  bool grad_check = false;
  std::string out;
  std::string synonyms;
};

int cmd_eval(const EvalArgs& a) {
  const auto lexicon = load_lexicon(a.synonyms);
  nlohmann::json report = {{"seed", a.seed}};
  int code = kExitOk;
  if (a.grad_check) {
    DatagenOptions o;
    o.n = 6;
    o.seed = a.seed;
    const auto samples = parse_lines(generate_lines(o, lexicon));
    const auto vocab = TokenVocab::build(lexicon);
    auto model = tiny_double_model(vocab, a.seed);
    const auto g = grad_check(model, make_batch(samples, vocab, true), 10.0);
    report["grad_check"] = {{"max_rel_error", g.max_rel_error},
                            {"checked", g.checked},
                            {"skipped_kinks", g.skipped_kinks}};
    std::cerr << "grad-check: " << g.checked << " parameters (" << g.skipped_kinks
              << " skipped at ReLU kinks), max relative error " << g.max_rel_error << '\n';
    if (!(g.max_rel_error <= 1e-4)) code = kExitPostCondition;
  }
  if (!a.ckpt.empty()) {
    L2MM model(load_checkpoint(a.ckpt));
    ExecContext ctx;
    ctx.lexicon = &lexicon;
    std::vector<TrainSample> samples;
    if (!a.data.empty()) {
      samples = read_corpus(a.data);
    } else if (a.n > 0) {
      DatagenOptions o;
      o.n = a.n;
      o.seed = a.seed;
      samples = parse_lines(generate_lines(o, lexicon));
    }
    if (samples.empty()) throw Error("evaluation set is empty");
    const auto acc = evaluate_states(model, samples);
    if (a.speed_n == 0) throw UsageError("--speed-n must be at least 1");
    const auto sm = eval_speed_metrics(model, speed_eval_set(a.speed_n, a.seed, a.speed, lexicon, ctx),
                                       a.speed);
    report["checkpoint"] = a.ckpt;
    report["state_accuracy"] = {{"joint", acc.joint},
                                {"mission", acc.mission},
                                {"search", acc.search},
                                {"motion_mse", acc.motion_mse},
                                {"n", acc.n}};
    report["speed"] = {{"v_star", a.speed}, {"sigma_v", sm.sigma_v}, {"eps_v", sm.eps_v}, {"n", sm.n}};
    std::cerr << "eval: joint state acc " << fmt(acc.joint, 4) << " on " << acc.n
              << " samples; at v*=" << a.speed << " sigma_v " << fmt(sm.sigma_v, 5) << ", eps_v "
              << fmt(sm.eps_v, 5) << '\n';
  } else if (!a.grad_check) {
    throw UsageError("eval needs --ckpt or --grad-check");
  }
  Sink sink(a.out);
  sink.out() << report.dump(2) << '\n';
  return code;
}

// ---------------------------------------------------------------- bench

struct SimArgs {
  std::string policy = "oracle";
  std::string ckpt;
  int states = 4;
  bool no_gate = false;
  double k_p = 1.0;
  double theta_max = 0.6;
  std::size_t window = DetectionSmoother::kDefaultWindow;
};

PolicyOptions policy_options(const SimArgs& s, const ClassLexicon& lexicon) {
  PolicyOptions p;
  p.kind = parse_policy_kind(s.policy);
  if (s.states != 3 && s.states != 4) throw UsageError("--states must be 3 or 4");
  p.mode = s.states == 3 ? StatesMode::kThree : StatesMode::kFour;
  p.window = s.window;
  p.ctx = make_context(lexicon, s.k_p, s.theta_max);
  if (p.kind == PolicyKind::kLearned) {
    if (s.ckpt.empty()) throw UsageError("--policy learned needs --ckpt");
    p.model = std::make_shared<L2MM>(load_checkpoint(s.ckpt));
  }
  return p;
}

struct BenchArgs {
  SimArgs sim;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::string suite = "all";
  std::string out;
  double min_sr = 0.0;
};

int cmd_bench(const BenchArgs& a) {
  if (a.trials == 0) throw UsageError("--trials must be at least 1");
  const auto& lexicon = ClassLexicon::standard();
  const auto factory = policy_factory(policy_options(a.sim, lexicon));
  std::vector<sim::Suite> suites =
      a.suite == "all" ? sim::all_suites() : std::vector<sim::Suite>{sim::parse_suite(a.suite)};
  Sink sink(a.out);
  sim::write_benchmark_header(sink.out(), a.seed);
  bool ok = true;
  for (auto s : suites) {
    sim::TrackingSpec spec;
    spec.suite = s;
    spec.gate = !a.sim.no_gate;
    const auto r = sim::run_benchmark(factory, spec, a.trials, a.seed, &sink.out());
    std::cerr << "bench " << a.sim.policy << ' ' << sim::to_string(s) << ": mean EL "
              << fmt(r.mean_el, 2) << ", SR " << fmt(r.sr, 2) << '\n';
    ok = ok && r.sr >= a.min_sr;
  }
  return ok ? kExitOk : kExitPostCondition;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string grid = "table4";
  std::size_t trials = 60;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_ablate(const AblateArgs& a) {
  if (a.trials == 0) throw UsageError("--trials must be at least 1");
  sim::AblationOptions o;
  o.trials = a.trials;
  o.base_seed = a.seed;
  std::vector<sim::AblationCell> grid;
  try {
    grid = sim::ablation_grid(a.grid);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  Sink sink(a.out);
  const auto rows = sim::run_search_ablation(grid, o, &sink.out());
  for (const auto& r : rows) {
    std::cerr << (r.cell.mode == StatesMode::kThree ? 3 : 4) << " states, gate "
              << (r.cell.gate ? "on " : "off") << ", " << r.cell.cls << " at " << r.cell.distance
              << " m: N_s " << fmt(r.mean_Ns, 2) << ", T_s " << fmt(r.mean_Ts, 2) << " s\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- blur

struct BlurArgs {
  std::string corpus;
  std::string out;
  std::size_t count = 1000;
  double fraction = 0.3;
  std::uint64_t seed = 1;
  std::string thresholds = "0,50,100,150,200,300,500";
};

BlurStreamOptions blur_options(const BlurArgs& a) {
  if (a.count == 0) throw UsageError("--count must be at least 1");
  if (!(a.fraction >= 0.0 && a.fraction <= 1.0)) throw UsageError("--fraction must be in [0, 1]");
  BlurStreamOptions o;
  o.count = a.count;
  o.blur_fraction = a.fraction;
  return o;
}

int cmd_blur_corpus(const BlurArgs& a) {
  if (a.out.empty()) throw UsageError("--out directory is required");
  const auto stream = generate_blur_stream(blur_options(a), a.seed);
  write_blur_corpus(a.out, stream);
  std::ofstream meta(std::filesystem::path(a.out) / "corpus.json");
  meta << nlohmann::json({{"seed", a.seed}, {"count", a.count}, {"blur_fraction", a.fraction}}).dump(2)
       << '\n';
  std::cerr << "blur-corpus: " << stream.frames.size() << " frames -> " << a.out << '\n';
  return kExitOk;
}

int cmd_blur_bench(const BlurArgs& a) {
  const auto thresholds = parse_threshold_list(a.thresholds);
  const BlurStream stream =
      a.corpus.empty() ? generate_blur_stream(blur_options(a), a.seed) : read_blur_corpus(a.corpus);
  if (stream.frames.empty()) throw Error("blur corpus is empty");
  Sink sink(a.out);
  auto& o = sink.out();
  o << "# seed=" << a.seed << '\n'
    << "threshold,flagged_fraction,qualified_ungated,qualified_gated,precision,recall\n";
  for (double t : thresholds) {
    const auto r = evaluate_blur_threshold(stream, t);
    o << fmt(r.threshold, 1) << ',' << fmt(r.flagged_fraction) << ',' << fmt(r.qualified_ungated)
      << ',' << fmt(r.qualified_gated) << ',' << fmt(r.precision) << ',' << fmt(r.recall) << '\n';
    std::cerr << "T=" << t << ": flagged " << fmt(r.flagged_fraction, 3) << ", qualified "
              << fmt(r.qualified_ungated, 3) << " -> " << fmt(r.qualified_gated, 3) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  SimArgs sim;
  std::string task;
  std::string mode = "sim";
  std::uint64_t seed = 1;
  std::string trace;
  std::string summary;
  std::string llm_bridge;
  std::string detector_bridge;
  std::string frames;
  double max_seconds = 120.0;
  double blur_threshold = FrameGate::kDefaultThreshold;
  bool stop_on_failure = false;
};

int cmd_run(const RunArgs& a) {
  const auto& lexicon = ClassLexicon::standard();
  auto policy = make_policy(policy_options(a.sim, lexicon));
  std::unique_ptr<Planner> planner;
  const auto llm = env_or(a.llm_bridge, kLlmBridgeEnv);
  if (llm.empty()) {
    planner = std::make_unique<Planner>(lexicon);
  } else {
    std::shared_ptr<JsonLineTransport> t;
    try {
      t = connect_bridge(llm);
    } catch (const BridgeError& e) {
      std::cerr << "warning: planner bridge unavailable (" << e.what() << "), using templates\n";
    }
    planner = t ? std::make_unique<Planner>(lexicon, t, std::chrono::seconds(10))
                : std::make_unique<Planner>(lexicon);
  }
  MissionOptions mo;
  mo.seed = a.seed;
  mo.max_seconds = a.max_seconds;
  mo.gate = !a.sim.no_gate;
  mo.blur_threshold = a.blur_threshold;
  mo.continue_on_failure = !a.stop_on_failure;

  Sink trace_sink(a.trace);
  TraceWriter trace(trace_sink.out(), a.seed);
  MissionSummary s;
  if (a.mode == "sim") {
    s = run_mission_sim(a.task, *planner, *policy, mo, &trace);
  } else if (a.mode == "live") {
    const auto endpoint = env_or(a.detector_bridge, kDetectorBridgeEnv);
    if (endpoint.empty()) throw UsageError("live mode needs a detector bridge endpoint");
    if (a.frames.empty()) throw UsageError("live mode needs --frames <dir of PPM files>");
    std::vector<std::filesystem::path> frames;
    for (const auto& e : std::filesystem::directory_iterator(a.frames)) {
      if (e.path().extension() == ".ppm") frames.push_back(e.path());
    }
    std::sort(frames.begin(), frames.end());
    auto detector = connect_bridge(endpoint);
    s = run_mission_live(a.task, *planner, *policy, *detector, frames, mo, &trace);
  } else {
    throw UsageError("--mode must be sim or live");
  }
  const auto j = s.to_json();
  if (!a.summary.empty()) {
    std::ofstream f(a.summary);
    f << j.dump(2) << '\n';
  }
  std::cerr << "run: " << s.succeeded() << "/" << s.subtasks.size() << " subtasks success\n";
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  if (a.summary.empty()) std::cerr << j.dump(2) << '\n';
  return s.succeeded() == s.subtasks.size() ? kExitOk : kExitPostCondition;
}

void add_sim_options(CLI::App* app, SimArgs& s) {
  app->add_option("--policy", s.policy, "oracle, learned or zero")->capture_default_str();
  app->add_option("--ckpt", s.ckpt, "L2MM checkpoint for --policy learned");
  app->add_option("--states", s.states, "3 or 4 state execution")->capture_default_str();
  app->add_flag("--no-gate", s.no_gate, "disable the blur gate");
  app->add_option("--kp", s.k_p, "heading gain")->capture_default_str();
  app->add_option("--theta-max", s.theta_max, "heading clamp (rad/s)")->capture_default_str();
  app->add_option("--window", s.window, "smoother window")->capture_default_str();
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Language-to-motion navigation toolkit"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values; command-line flags win");

  DatagenArgs dg;
  auto* datagen = app.add_subcommand("datagen", "generate a labelled training corpus");
  datagen->add_option("--n", dg.n, "number of samples")->required();
  datagen->add_option("--seed", dg.seed)->required();
  datagen->add_option("--out", dg.out, "output JSONL path")->required();
  datagen->add_option("--shards", dg.shards)->capture_default_str();
  datagen->add_option("--threads", dg.threads, "0 = hardware concurrency")->capture_default_str();
  datagen->add_option("--synonym-rounds", dg.synonym_rounds, "expand synonyms via the LLM bridge");
  datagen->add_option("--synonyms-out", dg.synonyms_out, "write the expanded synonym table");
  datagen->add_option("--llm-bridge", dg.llm_bridge, "exec:<cmd> or tcp:<host>:<port>");
  datagen->add_option("--threshold-seeds", dg.threshold_seeds, "JSON {class: tau} seed thresholds");
  datagen->add_flag("--replay", dg.replay, "re-derive every target after writing");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train an L2MM checkpoint");
  train->add_option("--data", tr.data, "JSONL corpus");
  train->add_option("--n", tr.n, "generate this many samples instead of --data");
  train->add_option("--limit", tr.limit, "read at most this many corpus lines");
  train->add_option("--seed", tr.seed)->required();
  train->add_option("--preset", tr.preset, "tiny, small, base or large")->capture_default_str();
  train->add_option("--epochs", tr.epochs)->capture_default_str();
  train->add_option("--batch", tr.batch)->capture_default_str();
  train->add_option("--lr", tr.lr)->capture_default_str();
  train->add_option("--weight-decay", tr.wd)->capture_default_str();
  train->add_option("--beta", tr.beta, "motion loss weight")->capture_default_str();
  train->add_option("--val-fraction", tr.val_fraction)->capture_default_str();
  train->add_option("--dropout", tr.dropout);
  train->add_flag("--no-sep", tr.no_sep, "encode without [SEP] tokens");
  train->add_option("--out", tr.out, "checkpoint path")->required();
  train->add_option("--log", tr.log, "training log CSV (default <out>.log.csv)");
  train->add_option("--synonyms", tr.synonyms, "synonym table from datagen --synonyms-out");

  IoeArgs io;
  auto* ioe = app.add_subcommand("ioe-train", "train the instruction object extractor");
  ioe->add_option("--n", io.n)->capture_default_str();
  ioe->add_option("--seed", io.seed)->required();
  ioe->add_option("--epochs", io.epochs)->capture_default_str();
  ioe->add_option("--batch", io.batch)->capture_default_str();
  ioe->add_option("--lr", io.lr)->capture_default_str();
  ioe->add_option("--eval-n", io.eval_n)->capture_default_str();
  ioe->add_option("--out", io.out)->required();
  ioe->add_option("--log", io.log);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "state accuracy, speed metrics, gradient check");
  eval->add_option("--ckpt", ev.ckpt);
  eval->add_option("--data", ev.data, "evaluation corpus (default: freshly generated)");
  eval->add_option("--n", ev.n, "generated evaluation samples")->capture_default_str();
  eval->add_option("--speed-n", ev.speed_n)->capture_default_str();
  eval->add_option("--speed", ev.speed, "commanded speed v*")->capture_default_str();
  eval->add_option("--seed", ev.seed)->capture_default_str();
  eval->add_flag("--grad-check", ev.grad_check, "finite-difference check on a tiny model");
  eval->add_option("--out", ev.out, "JSON report path (default stdout)");
  eval->add_option("--synonyms", ev.synonyms);

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "tracking benchmark (EL / SR)");
  add_sim_options(bench, bn.sim);
  bench->add_option("--trials", bn.trials)->capture_default_str();
  bench->add_option("--seed", bn.seed)->required();
  bench->add_option("--suite", bn.suite, "all or one suite")->capture_default_str();
  bench->add_option("--out", bn.out, "CSV path (default stdout)");
  bench->add_option("--min-sr", bn.min_sr, "exit 2 when any suite falls below")->capture_default_str();

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "search-efficiency ablation (N_s / T_s)");
  ablate->add_option("--grid", ab.grid, "table4 or full")->capture_default_str();
  ablate->add_option("--trials", ab.trials)->capture_default_str();
  ablate->add_option("--seed", ab.seed)->capture_default_str();
  ablate->add_option("--out", ab.out, "CSV path (default stdout)");

  BlurArgs bc;
  auto* blur_corpus = app.add_subcommand("blur-corpus", "write a labelled sharp/blurred PPM corpus");
  blur_corpus->add_option("--out", bc.out)->required();
  blur_corpus->add_option("--count", bc.count)->capture_default_str();
  blur_corpus->add_option("--fraction", bc.fraction)->capture_default_str();
  blur_corpus->add_option("--seed", bc.seed)->capture_default_str();

  BlurArgs bb;
  auto* blur_bench = app.add_subcommand("blur-bench", "qualified-frame ratio per blur threshold");
  blur_bench->add_option("--corpus", bb.corpus, "corpus directory (default: generated)");
  blur_bench->add_option("--thresholds", bb.thresholds, "comma-separated list")->capture_default_str();
  blur_bench->add_option("--count", bb.count)->capture_default_str();
  blur_bench->add_option("--fraction", bb.fraction)->capture_default_str();
  blur_bench->add_option("--seed", bb.seed)->capture_default_str();
  blur_bench->add_option("--out", bb.out, "CSV path (default stdout)");

  RunArgs rn;
  auto* run = app.add_subcommand("run", "plan and execute a long-horizon task");
  run->add_option("task", rn.task, "task description")->required();
  add_sim_options(run, rn.sim);
  run->add_option("--mode", rn.mode, "sim or live")->capture_default_str();
  run->add_option("--seed", rn.seed)->capture_default_str();
  run->add_option("--trace", rn.trace, "per-tick CSV (default stdout)");
  run->add_option("--summary", rn.summary, "mission summary JSON");
  run->add_option("--llm-bridge", rn.llm_bridge);
  run->add_option("--detector-bridge", rn.detector_bridge);
  run->add_option("--frames", rn.frames, "PPM directory for live mode");
  run->add_option("--max-seconds", rn.max_seconds, "per-subtask timeout")->capture_default_str();
  run->add_option("--blur-threshold", rn.blur_threshold)->capture_default_str();
  run->add_flag("--stop-on-failure", rn.stop_on_failure);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*datagen) return cmd_datagen(dg);
    if (*train) return cmd_train(tr);
    if (*ioe) return cmd_ioe_train(io);
    if (*eval) return cmd_eval(ev);
    if (*bench) return cmd_bench(bn);
    if (*ablate) return cmd_ablate(ab);
    if (*blur_corpus) return cmd_blur_corpus(bc);
    if (*blur_bench) return cmd_blur_bench(bb);
    if (*run) return cmd_run(rn);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BridgeError& e) {
    std::cerr << "bridge error: " << e.what() << '\n';
    return kExitBridge;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPostCondition;
  }
  return kExitUsage;
}

}  // namespace navstack::harness
