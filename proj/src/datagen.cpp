#include "navstack/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "navstack/planner.hpp"

namespace navstack {

namespace {

// Verbs that read naturally without a preposition.
bool direct_verb(std::string_view v) { return v == "approach" || v == "find"; }

bool starts_with_vowel(const std::string& s) {
  return !s.empty() && std::string_view("aeiou").find(s[0]) != std::string_view::npos;
}

std::string speed_text(double v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

double category_scale(SizeCategory c) {
  switch (c) {
    case SizeCategory::kSmall: return 0.8;
    case SizeCategory::kMedium: return 1.0;
    case SizeCategory::kLarge: return 1.2;
  }
  return 1.0;
}

int category_rank(SizeCategory c) { return static_cast<int>(c); }

struct LineInfo {
  std::string cls;
  ScenarioKind kind;
  ActiveState target;
};

struct ShardOutput {
  std::vector<std::string> lines;
  std::vector<LineInfo> info;
  std::size_t local_dups = 0;
};

ActiveState target_active(const TrainSample& s) {
  if (s.mission == MissionState::kSuccess) return ActiveState::kSuccess;
  if (s.motion.v_x > 0.0) return ActiveState::kRunning;
  return s.search == SearchState::kSearching0 ? ActiveState::kSearching0 : ActiveState::kSearching1;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SynonymExpansion expand_synonyms(const ClassLexicon& lexicon, JsonLineTransport* bridge, int rounds,
                                 std::chrono::milliseconds timeout) {
  if (lexicon.size() == 0) throw Error("lexicon is empty");
  SynonymExpansion out;
  out.table = lexicon.synonyms();
  if (!bridge) return out;
  for (int round = 0; round < rounds; ++round) {
    for (const auto& cls : lexicon.classes()) {
      const nlohmann::json req = {{"kind", "synonyms"},
                                  {"class", cls},
                                  {"existing", out.table.synonyms(cls)}};
      const auto resp = bridge->request(req, timeout);
      if (!resp.contains("synonyms") || !resp["synonyms"].is_array()) {
        throw BridgeError("synonym bridge response lacks a 'synonyms' array");
      }
      for (const auto& item : resp["synonyms"]) {
        std::string syn = join_words(split_words(item.get<std::string>()), 0, 64);
        if (syn.empty()) continue;
        const auto owner = out.table.owner(syn);
        if (owner && *owner == cls) {
          ++out.duplicates;
        } else if (owner) {
          out.rejected.push_back("synonym '" + syn + "' offered for '" + cls + "' already belongs to '" +
                                 *owner + "'");
        } else if (out.table.add(cls, syn)) {
          ++out.added;
        }
      }
    }
  }
  return out;
}

ClassLexicon with_synonyms(const ClassLexicon& lexicon, SynonymTable table) {
  std::vector<SizeCategory> sizes;
  for (const auto& c : lexicon.classes()) sizes.push_back(lexicon.size_category(c));
  return ClassLexicon(lexicon.classes(), std::move(sizes), std::move(table));
}

std::vector<double> speed_grid() {
  std::vector<double> v;
  for (int k = 2; k <= 20; ++k) v.push_back(k * 5 / 100.0);
  return v;
}

std::string vary_instruction(const ClassLexicon& lexicon, const std::string& cls, double speed,
                             Rng& rng) {
  if (!(speed > 0.0 && speed <= kMaxSpeed)) throw Error("speed outside (0, 1]");
  const auto& syns = lexicon.synonyms().synonyms(cls);
  if (syns.empty()) throw Error("class '" + cls + "' has no surface forms");
  const std::string verb(kVerbs[rng.index(kVerbs.size())]);
  const std::string& noun = syns[rng.index(syns.size())];
  std::string s = verb;
  if (!direct_verb(verb)) s += " " + std::string(kPrepositions[rng.index(kPrepositions.size())]);
  switch (rng.index(3)) {
    case 0: s += " the"; break;
    case 1: s += starts_with_vowel(noun) ? " an" : " a"; break;
    default: break;
  }
  s += " " + noun + " at " + speed_text(speed) + " m/s";
  return s;
}

std::string vary_task(const ClassLexicon& lexicon,
                      const std::vector<std::pair<std::string, double>>& steps, Rng& rng) {
  static const char* const kJoin[] = {" then ", " and ", ", after that ", ". Then ", ", then "};
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out += kJoin[rng.index(std::size(kJoin))];
    out += vary_instruction(lexicon, steps[i].first, steps[i].second, rng);
  }
  return out;
}

ThresholdTable generate_thresholds(const std::map<std::string, double>& seeds,
                                   const ClassLexicon& lexicon) {
  if (seeds.empty()) throw Error("threshold generation needs at least one seed example");
  std::map<int, std::pair<double, int>> by_cat;  // rank -> (sum of scale-free values, count)
  for (const auto& [cls, tau] : seeds) {
    if (!lexicon.contains(cls)) throw Error("seed class '" + cls + "' is not in the lexicon");
    if (!(tau > 0.0 && tau < 1.0)) throw Error("seed threshold for '" + cls + "' outside (0, 1)");
    auto& e = by_cat[category_rank(lexicon.size_category(cls))];
    e.first += tau;
    e.second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& cls : lexicon.classes()) {
    if (auto it = seeds.find(cls); it != seeds.end()) {
      out[cls] = it->second;
      continue;
    }
    const SizeCategory cat = lexicon.size_category(cls);
    const int rank = category_rank(cat);
    double tau = 0.0;
    if (auto it = by_cat.find(rank); it != by_cat.end()) {
      tau = it->second.first / it->second.second;
    } else {
      // Nearest seeded category; the smaller one wins a tie.
      int best = -1;
      for (const auto& [r, e] : by_cat) {
        if (best < 0 || std::abs(r - rank) < std::abs(best - rank)) best = r;
      }
      const auto& e = by_cat.at(best);
      tau = e.first / e.second * category_scale(cat) /
            category_scale(static_cast<SizeCategory>(best));
    }
    out[cls] = std::clamp(tau, 0.05, 0.95);
  }
  return ThresholdTable(std::move(out));
}

std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kRunning: return "running";
    case ScenarioKind::kSearching: return "searching";
    case ScenarioKind::kSuccess: return "success";
    case ScenarioKind::kNewMission: return "new_mission";
  }
  return "running";
}

void ScenarioMix::validate() const {
  const double sum = running + searching + success + new_mission;
  if (running < 0 || searching < 0 || success < 0 || new_mission < 0 || std::fabs(sum - 1.0) > 1e-9) {
    throw Error("scenario mix weights must be non-negative and sum to 1");
  }
}

ScenarioSampler::ScenarioSampler(const ClassLexicon& lexicon, ThresholdTable thresholds,
                                 ScenarioMix mix)
    : lexicon_(lexicon), thresholds_(std::move(thresholds)), mix_(mix) {
  mix_.validate();
}

Detection ScenarioSampler::detection(Rng& rng, const std::string& cls, double h_lo,
                                     double h_hi) const {
  Detection d;
  d.label = cls;
  d.h = round2(rng.uniform(h_lo, h_hi));
  d.w = round2(clamp01(0.6 * d.h + 0.02 * rng.normal()));
  d.cx = round2(rng.uniform());
  d.cy = round2(rng.uniform(0.3, 0.7));
  d.confidence = round2(rng.uniform(0.05, 1.0));
  return d;
}

Scenario ScenarioSampler::draw(Rng& rng) const {
  const double u = rng.uniform();
  ScenarioKind k = ScenarioKind::kNewMission;
  if (u < mix_.running) {
    k = ScenarioKind::kRunning;
  } else if (u < mix_.running + mix_.searching) {
    k = ScenarioKind::kSearching;
  } else if (u < mix_.running + mix_.searching + mix_.success) {
    k = ScenarioKind::kSuccess;
  }
  return draw(rng, k);
}

Scenario ScenarioSampler::draw_running(Rng& rng, const std::string& cls, double speed) const {
  Scenario s;
  s.kind = ScenarioKind::kRunning;
  s.target_class = cls;
  s.speed = speed;
  s.input.curr_instruction = vary_instruction(lexicon_, cls, speed, rng);
  s.input.prev_instruction = s.input.curr_instruction;
  s.input.mission = MissionState::kRunning;
  s.input.search = rng.bernoulli(0.5) ? SearchState::kSearching0 : SearchState::kSearching1;
  const double tau = thresholds_.at(cls);
  s.input.detection = detection(rng, cls, 0.05, tau - 0.01);
  return s;
}

Scenario ScenarioSampler::draw(Rng& rng, ScenarioKind kind) const {
  const auto& classes = lexicon_.classes();
  const std::string cls = classes[rng.index(classes.size())];
  const auto speeds = speed_grid();
  const double speed = speeds[rng.index(speeds.size())];
  Scenario s = draw_running(rng, cls, speed);
  s.kind = kind;
  const double tau = thresholds_.at(cls);
  auto above = [&] { return detection(rng, cls, tau, std::min(1.0, tau + 0.4)); };

  switch (kind) {
    case ScenarioKind::kRunning: break;
    case ScenarioKind::kSearching: s.input.detection.reset(); break;
    case ScenarioKind::kSuccess:
      if (rng.bernoulli(0.5)) {
        s.input.detection = above();
      } else {
        // Holding an earlier success, whatever the detector says now.
        s.input.mission = MissionState::kSuccess;
        const auto r = rng.index(3);
        if (r == 0) s.input.detection.reset();
        if (r == 2) s.input.detection = above();
      }
      break;
    case ScenarioKind::kNewMission: {
      do {
        const std::string other = classes[rng.index(classes.size())];
        s.input.prev_instruction =
            vary_instruction(lexicon_, other, speeds[rng.index(speeds.size())], rng);
      } while (s.input.prev_instruction == s.input.curr_instruction);
      s.input.mission = rng.bernoulli(0.5) ? MissionState::kSuccess : MissionState::kRunning;
      const double r = rng.uniform();
      if (r < 0.40) {
        s.input.detection.reset();
      } else if (r >= 0.85) {
        s.input.detection = above();
      }
      break;
    }
  }
  return s;
}

ExecState replay_state(const EncoderInput& in) {
  ExecState e;
  e.mission = in.mission;
  e.search = in.search;
  e.prev_instruction = in.prev_instruction;
  e.last_seen_side = in.search == SearchState::kSearching0 ? Side::kLeft : Side::kRight;
  e.mode = StatesMode::kFour;
  return e;
}

TrainSample oracle_label(const Scenario& s, const ExecContext& ctx) {
  MissionInstruction instr{s.input.curr_instruction, s.target_class, s.speed};
  const auto r = step(replay_state(s.input), instr, s.input.detection, ctx);
  TrainSample t;
  t.input = s.input;
  t.motion = r.command;
  t.mission = r.state.mission;
  t.search = r.state.search;
  return t;
}

std::string sample_line(const TrainSample& s) {
  nlohmann::ordered_json j;
  const auto& d = s.input.detection;
  j["im0"] = s.input.prev_instruction;
  j["im1"] = s.input.curr_instruction;
  j["obj"] = d ? d->label : "none";
  j["conf"] = d ? d->confidence : 0.0;
  j["cx"] = d ? d->cx : 0.0;
  j["cy"] = d ? d->cy : 0.0;
  j["w"] = d ? d->w : 0.0;
  j["h"] = d ? d->h : 0.0;
  j["sm"] = to_string(s.input.mission);
  j["ss"] = to_string(s.input.search);
  j["target"]["v"] = {s.motion.v_x, s.motion.v_y, s.motion.theta};
  j["target"]["sm"] = to_string(s.mission);
  j["target"]["ss"] = to_string(s.search);
  return j.dump();
}

nlohmann::json sample_to_json(const TrainSample& s) { return nlohmann::json::parse(sample_line(s)); }

TrainSample sample_from_json(const nlohmann::json& j) {
  TrainSample s;
  s.input.prev_instruction = j.at("im0").get<std::string>();
  s.input.curr_instruction = j.at("im1").get<std::string>();
  const std::string obj = j.at("obj").get<std::string>();
  if (obj != "none") {
    Detection d;
    d.label = obj;
    d.confidence = j.at("conf");
    d.cx = j.at("cx");
    d.cy = j.at("cy");
    d.w = j.at("w");
    d.h = j.at("h");
    if (!d.valid()) throw Error("corpus detection outside [0, 1]");
    s.input.detection = d;
  }
  s.input.mission = parse_mission_state(j.at("sm").get<std::string>());
  s.input.search = parse_search_state(j.at("ss").get<std::string>());
  const auto& t = j.at("target");
  const auto v = t.at("v").get<std::vector<double>>();
  if (v.size() != 3) throw Error("target motion must have three components");
  s.motion = {v[0], v[1], v[2]};
  s.mission = parse_mission_state(t.at("sm").get<std::string>());
  s.search = parse_search_state(t.at("ss").get<std::string>());
  return s;
}

nlohmann::json DatagenStats::to_json() const {
  return {{"seed", seed},
          {"n", n},
          {"duplicates_dropped", duplicates_dropped},
          {"class_counts", class_counts},
          {"scenario_counts", scenario_counts},
          {"target_state_counts", target_state_counts},
          {"seconds", seconds}};
}

std::vector<std::string> generate_lines(const DatagenOptions& opts, const ClassLexicon& lexicon,
                                        DatagenStats* stats) {
  if (opts.n == 0) throw Error("n must be at least 1");
  if (opts.shards == 0) throw Error("shards must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioSampler sampler(lexicon, opts.thresholds, opts.mix);
  ExecContext ctx;
  ctx.lexicon = &lexicon;
  ctx.thresholds = opts.thresholds;

  auto make = [&](Rng& rng, std::string& line, LineInfo& info) {
    const Scenario sc = sampler.draw(rng);
    const TrainSample t = oracle_label(sc, ctx);
    line = sample_line(t);
    info = {sc.target_class, sc.kind, target_active(t)};
  };

  std::vector<ShardOutput> shards(opts.shards);
  auto run_shard = [&](std::size_t k) {
    const std::size_t quota = opts.n / opts.shards + (k < opts.n % opts.shards ? 1 : 0);
    Rng rng(Rng::derive(opts.seed, 0xDA7A, k));
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(quota * 2);
    auto& out = shards[k];
    out.lines.reserve(quota);
    std::string line;
    LineInfo info;
    while (out.lines.size() < quota) {
      make(rng, line, info);
      if (!seen.insert(fnv1a64(line)).second) {
        ++out.local_dups;
        continue;
      }
      out.lines.push_back(line);
      out.info.push_back(info);
    }
  };
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(opts.shards));
  if (threads <= 1) {
    for (std::size_t k = 0; k < opts.shards; ++k) run_shard(k);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < opts.shards;) run_shard(k);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Shard-major merge; cross-shard repeats are refilled from one extra stream.
  std::vector<std::string> lines;
  std::vector<LineInfo> infos;
  lines.reserve(opts.n);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(opts.n * 2);
  std::size_t dups = 0;
  for (auto& sh : shards) {
    dups += sh.local_dups;
    for (std::size_t i = 0; i < sh.lines.size(); ++i) {
      if (!seen.insert(fnv1a64(sh.lines[i])).second) {
        ++dups;
        continue;
      }
      lines.push_back(std::move(sh.lines[i]));
      infos.push_back(sh.info[i]);
    }
    sh = {};
  }
  Rng refill(Rng::derive(opts.seed, 0xF111));
  std::string line;
  LineInfo info;
  while (lines.size() < opts.n) {
    make(refill, line, info);
    if (!seen.insert(fnv1a64(line)).second) {
      ++dups;
      continue;
    }
    lines.push_back(line);
    infos.push_back(info);
  }

  if (stats) {
    stats->seed = opts.seed;
    stats->n = lines.size();
    stats->duplicates_dropped = dups;
    stats->class_counts.clear();
    stats->scenario_counts.clear();
    stats->target_state_counts.clear();
    for (const auto& i : infos) {
      ++stats->class_counts[i.cls];
      ++stats->scenario_counts[std::string(to_string(i.kind))];
      ++stats->target_state_counts[std::string(to_string(i.target))];
    }
    stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return lines;
}

DatagenStats generate_dataset(const DatagenOptions& opts, const ClassLexicon& lexicon,
                              const std::filesystem::path& out) {
  DatagenStats stats;
  const auto lines = generate_lines(opts, lexicon, &stats);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error("cannot write corpus " + out.string());
  for (const auto& l : lines) {
    f.write(l.data(), static_cast<std::streamsize>(l.size()));
    f.put('\n');
  }
  if (!f) throw Error("failed writing corpus " + out.string());
  std::ofstream s(out.string() + ".stats.json");
  if (!s) throw Error("cannot write stats for " + out.string());
  s << stats.to_json().dump(2) << '\n';
  return stats;
}

std::vector<TrainSample> read_corpus(const std::filesystem::path& path, std::size_t limit) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  std::vector<TrainSample> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
    if (limit && out.size() >= limit) break;
  }
  return out;
}

namespace {

std::string describe_mismatch(const TrainSample& want, const TrainSample& got) {
  std::ostringstream o;
  o << "target v=[" << want.motion.v_x << "," << want.motion.v_y << "," << want.motion.theta
    << "] " << to_string(want.mission) << "/" << to_string(want.search) << ", rules give v=["
    << got.motion.v_x << "," << got.motion.v_y << "," << got.motion.theta << "] "
    << to_string(got.mission) << "/" << to_string(got.search);
  return o.str();
}

bool replay_one(const TrainSample& s, const ExecContext& ctx, TrainSample& got) {
  Scenario sc;
  sc.input = s.input;
  // Class and speed come from the instruction, as the planner would read them.
  const auto parsed = parse_instruction(s.input.curr_instruction, *ctx.lexicon);
  sc.target_class = parsed.target_class;
  sc.speed = parsed.speed;
  got = oracle_label(sc, ctx);
  return got.motion == s.motion && got.mission == s.mission && got.search == s.search;
}

}  // namespace

ReplayReport replay_samples(const std::vector<TrainSample>& samples, const ExecContext& ctx) {
  ReplayReport r;
  TrainSample got;
  for (const auto& s : samples) {
    ++r.checked;
    if (!replay_one(s, ctx, got)) {
      if (r.mismatches++ == 0) {
        r.first_bad_line = r.checked;
        r.first_diff = describe_mismatch(s, got);
      }
    }
  }
  return r;
}

ReplayReport replay_corpus(const std::filesystem::path& path, const ExecContext& ctx) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  ReplayReport r;
  std::string line;
  TrainSample got;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const TrainSample s = sample_from_json(nlohmann::json::parse(line));
    ++r.checked;
    if (!replay_one(s, ctx, got)) {
      if (r.mismatches++ == 0) {
        r.first_bad_line = r.checked;
        r.first_diff = describe_mismatch(s, got);
      }
    }
  }
  return r;
}

std::vector<TrainSample> speed_eval_set(std::size_t n, std::uint64_t seed, double speed,
                                        const ClassLexicon& lexicon, const ExecContext& ctx) {
  const ScenarioSampler sampler(lexicon, ctx.thresholds);
  Rng rng(Rng::derive(seed, 0x5BEE));
  std::vector<TrainSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cls = lexicon.classes()[rng.index(lexicon.size())];
    out.push_back(oracle_label(sampler.draw_running(rng, cls, speed), ctx));
  }
  return out;
}

std::vector<std::string> instruction_corpus(std::size_t n, std::uint64_t seed,
                                            const ClassLexicon& lexicon) {
  Rng rng(Rng::derive(seed, 0x10E));
  const auto speeds = speed_grid();
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cls = lexicon.classes()[rng.index(lexicon.size())];
    out.push_back(vary_instruction(lexicon, cls, speeds[rng.index(speeds.size())], rng));
  }
  return out;
}

}  // namespace navstack
