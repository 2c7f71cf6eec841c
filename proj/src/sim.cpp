#include "navstack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "navstack/blur_corpus.hpp"

namespace navstack::sim {

namespace {

double wrap(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

void clamp_pose(Pose& p, double e) {
  p.x = std::clamp(p.x, -e, e);
  p.y = std::clamp(p.y, -e, e);
}

Pose offset(const Pose& from, double distance, double bearing) {
  const double h = from.heading + bearing;
  return {from.x + distance * std::cos(h), from.y - distance * std::sin(h), 0.0};
}

ExecContext uniform_context(double tau) {
  ExecContext ctx;
  ctx.thresholds = ThresholdTable({}, tau);
  return ctx;
}

bool searching(ActiveState s) {
  return s == ActiveState::kSearching0 || s == ActiveState::kSearching1;
}

}  // namespace

void World::clamp() {
  clamp_pose(tracker, half_extent);
  for (auto& t : targets) clamp_pose(t.pose, half_extent);
}

void VisibilityFan::validate() const {
  if (!(half_angle > 0.0 && half_angle <= kPi) || !(radius > 0.0)) {
    throw Error("visibility fan needs a positive angle and radius");
  }
}

Polar relative(const Pose& tracker, const Pose& p) {
  const double dx = p.x - tracker.x;
  const double dy = p.y - tracker.y;
  // World angle is counter-clockwise; headings are clockwise.
  return {std::hypot(dx, dy), wrap(-std::atan2(dy, dx) - tracker.heading)};
}

bool in_fan(const World& w, const VisibilityFan& fan, const Pose& p) {
  const auto r = relative(w.tracker, p);
  return r.distance <= fan.radius && std::fabs(r.bearing) <= fan.half_angle;
}

double BlurModel::sample(const MotionCommand& cmd, Rng& rng) const {
  const double u = rng.uniform();
  const double j = rng.uniform(1.0 - jitter, 1.0 + jitter);
  const double k = rng.uniform();
  const double s = u < p_stance ? stance_factor : j;
  double sigma = s * (rate_gain * std::fabs(cmd.theta) + speed_gain * std::fabs(cmd.v_x));
  if (k < p_jolt) sigma += jolt_gain * std::fabs(cmd.v_x);
  return sigma;
}

double DetectorModel::multiplier(const std::string& cls) const {
  const auto it = multipliers.find(cls);
  return it == multipliers.end() ? 1.0 : it->second;
}

std::optional<Detection> project_detection(const World& w, const VisibilityFan& fan,
                                           const DetectorModel& det, const std::string& cls,
                                           Rng& rng, double blur) {
  double n[5];
  for (double& v : n) v = det.noise * rng.normal();

  const Target* best = nullptr;
  Polar best_rel;
  for (const auto& t : w.targets) {
    if (t.cls != cls) continue;
    const auto r = relative(w.tracker, t.pose);
    if (r.distance > fan.radius || std::fabs(r.bearing) > fan.half_angle) continue;
    if (!best || r.distance < best_rel.distance) {
      best = &t;
      best_rel = r;
    }
  }
  if (!best) return std::nullopt;
  if (det.multiplier(cls) * blur > 1.0) return std::nullopt;

  const double d = std::max(best_rel.distance, 1e-6);
  Detection out;
  out.label = cls;
  out.cx = clamp01(0.5 + best_rel.bearing / (kPi / 2.0) + n[0]);
  out.cy = clamp01(0.5 + n[1]);
  const double h = clamp01(det.h_ref / d);
  out.h = clamp01(h + n[2]);
  out.w = clamp01(0.6 * h + n[3]);
  out.confidence = clamp01(1.0 - d / fan.radius + n[4]);
  return out;
}

std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::kStationary: return "stationary";
    case Suite::kStraight: return "straight";
    case Suite::kZigzag: return "zigzag";
    case Suite::kRandomWaypoint: return "random-waypoint";
  }
  return "stationary";
}

Suite parse_suite(std::string_view s) {
  for (Suite x : all_suites())
    if (to_string(x) == s) return x;
  throw Error("unknown suite '" + std::string(s) + "'");
}

const std::vector<Suite>& all_suites() {
  static const std::vector<Suite> v{Suite::kStationary, Suite::kStraight, Suite::kZigzag,
                                    Suite::kRandomWaypoint};
  return v;
}

TrajectoryScript::TrajectoryScript(Suite suite, std::uint64_t seed, double tracker_speed)
    : suite_(suite), rng_(Rng::derive(seed, 0x7A11)) {
  const double cap = 0.6 * tracker_speed;
  speed_ = suite == Suite::kStationary ? 0.0 : rng_.uniform(2.0 / 3.0 * cap, cap);
}

void TrajectoryScript::place(World& w) {
  Target t;
  if (!w.targets.empty()) t = w.targets[0];
  t.pose = offset(w.tracker, 2.5, 0.0);
  base_heading_ = w.tracker.heading + rng_.uniform(-0.3, 0.3);
  t.pose.heading = base_heading_;
  t.speed = speed_;
  if (w.targets.empty()) {
    w.targets.push_back(t);
  } else {
    w.targets[0] = t;
  }
  if (suite_ == Suite::kRandomWaypoint) next_waypoint(w.targets[0]);
}

void TrajectoryScript::next_waypoint(const Target& t) {
  Pose p = t.pose;
  p.heading = base_heading_;
  const auto wp = offset(p, rng_.uniform(2.0, 4.0), rng_.uniform(-kPi / 3, kPi / 3));
  wx_ = wp.x;
  wy_ = wp.y;
}

void TrajectoryScript::advance(Target& t, std::size_t tick) {
  switch (suite_) {
    case Suite::kStationary: return;
    case Suite::kStraight: t.pose.heading = base_heading_; break;
    case Suite::kZigzag: {
      const double period = 6.0;  // seconds per full zig and zag
      const double phase = std::fmod(tick * kDt, period);
      t.pose.heading = base_heading_ + (phase < period / 2 ? 1.0 : -1.0) * (35.0 * kPi / 180.0);
      break;
    }
    case Suite::kRandomWaypoint: {
      if (std::hypot(wx_ - t.pose.x, wy_ - t.pose.y) < 0.2) next_waypoint(t);
      t.pose.heading = -std::atan2(wy_ - t.pose.y, wx_ - t.pose.x);
      break;
    }
  }
  t.pose.x += t.speed * kDt * std::cos(t.pose.heading);
  t.pose.y -= t.speed * kDt * std::sin(t.pose.heading);
}

void step_world(World& w, const MotionCommand& cmd, TrajectoryScript* script, std::size_t tick) {
  w.tracker.heading = wrap(w.tracker.heading + cmd.theta * kDt);
  w.tracker.x += cmd.v_x * kDt * std::cos(w.tracker.heading);
  w.tracker.y -= cmd.v_x * kDt * std::sin(w.tracker.heading);
  if (script && !w.targets.empty()) script->advance(w.targets[0], tick);
  w.clamp();
}

BlurCamera::BlurCamera(std::uint64_t seed, double gate_threshold, double flag_blur)
    : flag_blur_(flag_blur) {
  if (!(flag_blur > 0.0)) throw Error("flag blur level must be positive");
  Rng rng(Rng::derive(seed, 0xCA3E));
  texture_ = render_scene(rng, 48, 36);
  auto var = [&](double s) { return sharpness(gaussian_blur(texture_, s)); };
  if (gate_threshold <= 0.0 || var(0.0) < gate_threshold) {
    // Degenerate gates: nothing or everything is flagged whatever the blur.
    px_per_blur_ = 0.0;
    return;
  }
  double lo = 0.0, hi = 1.0;
  while (var(hi) >= gate_threshold && hi < 64.0) hi *= 2.0;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (var(mid) >= gate_threshold ? lo : hi) = mid;
  }
  px_per_blur_ = hi / flag_blur_;
}

const RawFrame& BlurCamera::render(double blur) {
  const long key = std::lround(pixel_sigma(blur) * 200.0);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, gaussian_blur(texture_, key / 200.0)).first;
  return it->second;
}

SimPerception::SimPerception(const DetectorModel& det, VisibilityFan fan, bool gate,
                             std::uint64_t seed, double gate_threshold)
    : det_(det),
      fan_(fan),
      use_gate_(gate),
      shake_rng_(Rng::derive(seed, 0x5A4E)),
      noise_rng_(Rng::derive(seed, 0xD37E)),
      gate_(gate_threshold) {
  fan_.validate();
  if (use_gate_) camera_.emplace(seed, gate_threshold);
}

std::optional<Detection> SimPerception::sense(const World& w, const std::string& cls,
                                              const MotionCommand& last_cmd) {
  const double blur = det_.blur.sample(last_cmd, shake_rng_);
  auto raw = project_detection(w, fan_, det_, cls, noise_rng_, blur);
  if (!raw) {
    for (const auto& t : w.targets) {
      if (t.cls == cls && in_fan(w, fan_, t.pose)) {
        ++dropouts_;
        break;
      }
    }
  }
  if (!use_gate_) return raw;
  const auto g = gate_.gate(camera_->render(blur));
  if (g.was_blurred && !g.pass_through) {
    // The gate hands the detector the last clear frame; its answer is the one
    // already computed on that frame.
    if (held_ && held_->label != cls) return std::nullopt;
    return held_;
  }
  held_ = raw;
  return raw;
}

std::string instruction_text(const std::string& cls, double speed, bool alternate) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s the %s at %.2f m/s", alternate ? "go to" : "approach",
                cls.c_str(), speed);
  return buf;
}

EpisodeResult run_tracking(Policy& policy, const TrackingSpec& spec, std::uint64_t seed,
                           TraceWriter* trace) {
  if (spec.max_ticks == 0) throw Error("max_ticks must be at least 1");
  policy.reset();
  World w;
  w.targets.push_back({spec.cls, {}, 0.0});
  TrajectoryScript script(spec.suite, seed, spec.speed);
  script.place(w);
  SimPerception perception(spec.detector, spec.fan, spec.gate, seed);

  EpisodeResult r;
  MotionCommand last;
  bool alternate = false;
  std::size_t out_of_fan = 0;
  ActiveState prev = ActiveState::kRunning;
  for (std::size_t tick = 1; tick <= spec.max_ticks; ++tick) {
    const MissionInstruction instr{instruction_text(spec.cls, spec.speed, alternate), spec.cls,
                                   spec.speed};
    const auto det = perception.sense(w, spec.cls, last);
    const auto out = policy.act(instr, det);
    if (trace) trace->write((tick - 1) * kDt, out.state, out.command, out.detection);
    r.states.push_back(out.state);
    r.N_s += searching(out.state) && !searching(prev);
    prev = out.state;
    // A reached target is re-issued so the tracker keeps following it.
    if (out.state == ActiveState::kSuccess) alternate = !alternate;
    last = out.command;
    step_world(w, last, &script, tick);
    r.EL = tick;
    out_of_fan = in_fan(w, spec.fan, w.targets[0].pose) ? 0 : out_of_fan + 1;
    if (out_of_fan >= spec.fail_after) break;
  }
  r.success = r.EL == spec.max_ticks && out_of_fan < spec.fail_after;
  r.T_s = r.EL * kDt;
  return r;
}

EpisodeResult run_navigation(Policy& policy, const NavigationSpec& spec, std::uint64_t seed,
                             TraceWriter* trace) {
  policy.reset();
  Rng rng(Rng::derive(seed, 0x4A71));
  World w;
  const double bearing = rng.uniform(spec.bearing_lo, spec.bearing_hi);
  w.targets.push_back({spec.cls, offset(w.tracker, spec.distance, bearing), 0.0});
  SimPerception perception(spec.detector, spec.fan, spec.gate, seed);

  const auto max_ticks = static_cast<std::size_t>(std::llround(spec.max_seconds / kDt));
  // Tick 0 never occurs, so it doubles as "no displacement".
  const std::size_t displace_tick =
      spec.displace_at ? static_cast<std::size_t>(std::max(1LL, std::llround(*spec.displace_at / kDt))) : 0;
  const MissionInstruction instr{instruction_text(spec.cls, spec.speed), spec.cls, spec.speed};

  EpisodeResult r;
  MotionCommand last;
  ActiveState prev = ActiveState::kRunning;
  for (std::size_t tick = 1; tick <= max_ticks; ++tick) {
    if (tick == displace_tick) {
      w.targets[0].pose = offset(w.tracker, spec.distance, rng.uniform(spec.bearing_lo, spec.bearing_hi));
      w.clamp();
    }
    const auto det = perception.sense(w, spec.cls, last);
    const auto out = policy.act(instr, det);
    if (trace) trace->write((tick - 1) * kDt, out.state, out.command, out.detection);
    r.states.push_back(out.state);
    r.N_s += searching(out.state) && !searching(prev);
    prev = out.state;
    r.EL = tick;
    if (out.state == ActiveState::kSuccess) {
      r.success = true;
      break;
    }
    last = out.command;
    step_world(w, last, nullptr, tick);
  }
  r.T_s = r.EL * kDt;
  return r;
}

void write_benchmark_header(std::ostream& csv, std::uint64_t seed) {
  csv << "# seed=" << seed << "\n" << "suite,seed,EL,success,N_s,T_s\n";
}

BenchmarkSummary run_benchmark(const PolicyFactory& factory, TrackingSpec spec, std::size_t trials,
                               std::uint64_t base_seed, std::ostream* csv) {
  if (trials == 0) throw Error("trials must be at least 1");
  BenchmarkSummary s;
  s.suite = spec.suite;
  auto policy = factory();
  double el = 0.0, ok = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const std::uint64_t seed = base_seed + i;
    auto r = run_tracking(*policy, spec, seed);
    el += static_cast<double>(r.EL);
    ok += r.success;
    if (csv) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f", r.T_s);
      *csv << to_string(spec.suite) << ',' << seed << ',' << r.EL << ',' << (r.success ? 1 : 0)
           << ',' << r.N_s << ',' << buf << '\n';
    }
    r.states.clear();
    r.states.shrink_to_fit();
    s.episodes.push_back(std::move(r));
  }
  s.mean_el = el / static_cast<double>(trials);
  s.sr = ok / static_cast<double>(trials);
  return s;
}

std::vector<AblationCell> ablation_grid(std::string_view name) {
  std::vector<std::pair<StatesMode, bool>> configs{
      {StatesMode::kThree, false}, {StatesMode::kFour, false}, {StatesMode::kFour, true}};
  if (name == "full") {
    configs.insert(configs.begin() + 1, {StatesMode::kThree, true});
  } else if (name != "table4") {
    throw Error("unknown ablation grid '" + std::string(name) + "' (expected table4 or full)");
  }
  std::vector<AblationCell> grid;
  for (const char* cls : {"backpack", "chair", "person"})
    for (const auto& [mode, gate] : configs)
      for (double d : {4.0, 6.0}) grid.push_back({mode, gate, cls, d});
  return grid;
}

std::vector<AblationRow> run_search_ablation(const std::vector<AblationCell>& grid,
                                             const AblationOptions& opts, std::ostream* csv) {
  if (grid.empty()) throw Error("ablation grid is empty");
  if (opts.trials == 0) throw Error("trials must be at least 1");
  if (csv) {
    *csv << "# seed=" << opts.base_seed << "\n"
         << "states,gate,difficulty,distance,mean_Ns,mean_Ts\n";
  }
  std::vector<AblationRow> rows;
  for (const auto& cell : grid) {
    RulePolicy policy(uniform_context(opts.tau), cell.mode);
    NavigationSpec spec = opts.base;
    spec.cls = cell.cls;
    spec.distance = cell.distance;
    spec.gate = cell.gate;
    spec.speed = opts.speed;
    AblationRow row;
    row.cell = cell;
    for (std::size_t i = 0; i < opts.trials; ++i) {
      const auto r = run_navigation(policy, spec, opts.base_seed + i);
      row.mean_Ns += static_cast<double>(r.N_s);
      row.mean_Ts += r.T_s;
      row.success_rate += r.success;
    }
    const double n = static_cast<double>(opts.trials);
    row.mean_Ns /= n;
    row.mean_Ts /= n;
    row.success_rate /= n;
    if (csv) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.4f,%.4f", row.mean_Ns, row.mean_Ts);
      *csv << (cell.mode == StatesMode::kThree ? 3 : 4) << ',' << (cell.gate ? 1 : 0) << ','
           << cell.cls << ',' << cell.distance << ',' << buf << '\n';
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace navstack::sim
