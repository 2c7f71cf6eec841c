#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "navstack/executor.hpp"
#include "navstack/perception.hpp"
#include "navstack/policy.hpp"

namespace navstack::sim {

inline constexpr double kDt = 1.0 / 15.0;
inline constexpr double kPi = 3.14159265358979323846;

/// Headings are clockwise-positive so that a positive yaw command (turn
/// right) increases them. Forward at heading h is (cos h, -sin h).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct Target {
  std::string cls = "person";
  Pose pose;
  double speed = 0.0;
};

struct World {
  Pose tracker;
  std::vector<Target> targets;  // targets[0] is the scripted one
  double half_extent = 50.0;    // arena is [-half_extent, half_extent]^2

  void clamp();
};

struct VisibilityFan {
  double half_angle = kPi / 4.0;
  double radius = 7.5;

  void validate() const;
};

/// Range and clockwise bearing (radians, in (-pi, pi]) from the tracker.
struct Polar {
  double distance = 0.0;
  double bearing = 0.0;
};
Polar relative(const Pose& tracker, const Pose& p);
bool in_fan(const World& w, const VisibilityFan& fan, const Pose& p);

/// Camera shake / motion blur per tick, in units where a class with
/// multiplier m loses the detection once m * sigma > 1.
struct BlurModel {
  double rate_gain = 1.35;   // per rad/s of yaw
  double speed_gain = 0.2;   // per m/s of forward speed
  double p_stance = 0.15;    // steady-camera ticks
  double stance_factor = 0.1;
  double jitter = 0.15;      // otherwise scaled by U(1 - jitter, 1 + jitter)
  double p_jolt = 0.0;       // foot impacts add jolt_gain per m/s
  double jolt_gain = 0.0;

  double sample(const MotionCommand& cmd, Rng& rng) const;
};

struct DetectorModel {
  double h_ref = 0.9;
  double noise = 0.01;
  BlurModel blur;
  std::map<std::string, double> multipliers{{"person", 1.0}, {"chair", 2.0}, {"backpack", 3.0}};

  double multiplier(const std::string& cls) const;
};

/// Noise-free geometry plus gaussian noise; `blur` decides the dropout.
/// Always consumes the same number of draws from `rng`.
std::optional<Detection> project_detection(const World& w, const VisibilityFan& fan,
                                           const DetectorModel& det, const std::string& cls,
                                           Rng& rng, double blur = 0.0);

enum class Suite { kStationary, kStraight, kZigzag, kRandomWaypoint };
std::string_view to_string(Suite s);
Suite parse_suite(std::string_view s);
const std::vector<Suite>& all_suites();

/// Motion of targets[0]. Speeds are capped at 0.6 x the tracker's commanded speed.
class TrajectoryScript {
 public:
  TrajectoryScript(Suite suite, std::uint64_t seed, double tracker_speed = 0.5);

  Suite suite() const { return suite_; }
  double speed() const { return speed_; }
  /// Places the target ahead of the tracker and fixes the base direction.
  void place(World& w);
  void advance(Target& t, std::size_t tick);

 private:
  void next_waypoint(const Target& t);

  Suite suite_;
  Rng rng_;
  double speed_ = 0.0;
  double base_heading_ = 0.0;
  double wx_ = 0.0, wy_ = 0.0;
};

/// Kinematic update for one tick; clamps poses into the arena.
void step_world(World& w, const MotionCommand& cmd, TrajectoryScript* script, std::size_t tick);

/// Renders a fixed texture blurred in proportion to the blur level, so the
/// Laplacian-variance gate sees exactly the frames a shaking camera would
/// produce. Calibrated so that blur > `flag_blur` falls below the gate threshold.
class BlurCamera {
 public:
  BlurCamera(std::uint64_t seed, double gate_threshold = FrameGate::kDefaultThreshold,
             double flag_blur = 0.3);

  const RawFrame& render(double blur);
  double pixel_sigma(double blur) const { return px_per_blur_ * blur; }
  double calibrated_sigma() const { return px_per_blur_ * flag_blur_; }

 private:
  RawFrame texture_;
  double flag_blur_;
  double px_per_blur_ = 0.0;
  std::map<long, RawFrame> cache_;
};

/// Perception front end: dropout from blur, optional gate that reuses the
/// detection from the last clear frame while frames are blurred.
class SimPerception {
 public:
  SimPerception(const DetectorModel& det, VisibilityFan fan, bool gate, std::uint64_t seed,
                double gate_threshold = FrameGate::kDefaultThreshold);

  std::optional<Detection> sense(const World& w, const std::string& cls,
                                 const MotionCommand& last_cmd);
  const GateStats& gate_stats() const { return gate_.stats(); }
  std::size_t raw_dropouts() const { return dropouts_; }

 private:
  DetectorModel det_;
  VisibilityFan fan_;
  bool use_gate_;
  Rng shake_rng_;
  Rng noise_rng_;
  FrameGate gate_;
  std::optional<BlurCamera> camera_;
  std::optional<Detection> held_;
  std::size_t dropouts_ = 0;
};

enum class EpisodeKind { kTracking, kNavigation };

struct EpisodeResult {
  std::size_t EL = 0;
  bool success = false;
  std::size_t N_s = 0;
  double T_s = 0.0;
  std::vector<ActiveState> states;  // per tick
};

struct TrackingSpec {
  Suite suite = Suite::kStationary;
  std::string cls = "person";
  double speed = 0.5;
  std::size_t max_ticks = 500;
  std::size_t fail_after = 50;  // consecutive out-of-fan ticks
  bool gate = true;
  DetectorModel detector;
  VisibilityFan fan;
};

struct NavigationSpec {
  std::string cls = "person";
  double speed = 0.5;
  double distance = 4.0;
  double bearing_lo = 0.75 * kPi;  // clockwise, behind the tracker
  double bearing_hi = 1.25 * kPi;
  double max_seconds = 200.0;
  bool gate = true;
  // Optional mid-episode displacement of the target to a fresh spot behind.
  std::optional<double> displace_at;
  DetectorModel detector;
  VisibilityFan fan;
};

EpisodeResult run_tracking(Policy& policy, const TrackingSpec& spec, std::uint64_t seed,
                           TraceWriter* trace = nullptr);
EpisodeResult run_navigation(Policy& policy, const NavigationSpec& spec, std::uint64_t seed,
                             TraceWriter* trace = nullptr);

struct BenchmarkSummary {
  Suite suite = Suite::kStationary;
  double mean_el = 0.0;
  double sr = 0.0;
  std::vector<EpisodeResult> episodes;
};

/// Episodes use seeds base_seed + i. Rows: suite,seed,EL,success,N_s,T_s
BenchmarkSummary run_benchmark(const PolicyFactory& factory, TrackingSpec spec, std::size_t trials,
                               std::uint64_t base_seed, std::ostream* csv = nullptr);
void write_benchmark_header(std::ostream& csv, std::uint64_t seed);

struct AblationCell {
  StatesMode mode = StatesMode::kFour;
  bool gate = true;
  std::string cls = "person";
  double distance = 4.0;
};

struct AblationRow {
  AblationCell cell;
  double mean_Ns = 0.0;
  double mean_Ts = 0.0;
  double success_rate = 0.0;
};

/// "table4": {3/no gate, 4/no gate, 4/gate} x {person, chair, backpack} x {4, 6} m.
/// "full" adds the 3/gate configuration.
std::vector<AblationCell> ablation_grid(std::string_view name);

struct AblationOptions {
  std::size_t trials = 40;
  std::uint64_t base_seed = 1;
  double tau = 0.55;  // one threshold for every class so distance-to-goal is equal
  double speed = 0.5;
  NavigationSpec base;
};

/// Rows: states,gate,difficulty,distance,mean_Ns,mean_Ts. Every cell reuses the
/// same episode seeds (common random numbers).
std::vector<AblationRow> run_search_ablation(const std::vector<AblationCell>& grid,
                                             const AblationOptions& opts,
                                             std::ostream* csv = nullptr);

std::string instruction_text(const std::string& cls, double speed, bool alternate = false);

}  // namespace navstack::sim
