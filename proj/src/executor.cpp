#include "navstack/executor.hpp"

#include <algorithm>
#include <iomanip>

namespace navstack {

std::string_view to_string(Side s) {
  switch (s) {
    case Side::kLeft: return "left";
    case Side::kRight: return "right";
    case Side::kUnknown: break;
  }
  return "unknown";
}

std::string_view to_string(StatesMode m) { return m == StatesMode::kThree ? "three" : "four"; }

std::string_view to_string(ActiveState a) {
  switch (a) {
    case ActiveState::kSuccess: return "success";
    case ActiveState::kRunning: return "running";
    case ActiveState::kSearching0: return "searching_0";
    case ActiveState::kSearching1: return "searching_1";
  }
  return "running";
}

StatesMode parse_states_mode(std::string_view s) {
  if (s == "three" || s == "3") return StatesMode::kThree;
  if (s == "four" || s == "4") return StatesMode::kFour;
  throw Error("states mode must be 'three' or 'four', got '" + std::string(s) + "'");
}

ActiveState ExecState::active() const {
  if (mission == MissionState::kSuccess) return ActiveState::kSuccess;
  if (!searching) return ActiveState::kRunning;
  return search == SearchState::kSearching0 ? ActiveState::kSearching0 : ActiveState::kSearching1;
}

void ControllerGains::validate() const {
  if (!(k_p > 0.0 && theta_max > 0.0 && omega_search > 0.0)) {
    throw Error("controller gains must be positive");
  }
}

ThresholdTable::ThresholdTable(std::map<std::string, double> values, double fallback)
    : values_(std::move(values)), fallback_(fallback) {
  if (!(fallback_ > 0.0 && fallback_ < 1.0)) throw Error("fallback threshold must lie in (0, 1)");
  for (const auto& [cls, tau] : values_) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error("threshold for '" + cls + "' must lie in (0, 1)");
  }
}

ThresholdTable ThresholdTable::defaults() {
  return ThresholdTable({{"person", 0.60},
                         {"chair", 0.50},
                         {"backpack", 0.45},
                         {"car", 0.65},
                         {"sports ball", 0.40}});
}

double ThresholdTable::at(const std::string& cls) const {
  auto it = values_.find(cls);
  return it == values_.end() ? fallback_ : it->second;
}

void ThresholdTable::set(const std::string& cls, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error("threshold for '" + cls + "' must lie in (0, 1)");
  values_[cls] = tau;
}

MotionCommand resolve_command(ActiveState state, double speed, double theta_corr,
                              const ControllerGains& gains) {
  switch (state) {
    case ActiveState::kSuccess: return {0.0, 0.0, 0.0};
    case ActiveState::kRunning: return {speed, 0.0, theta_corr};
    case ActiveState::kSearching0: return {0.0, 0.0, -gains.omega_search};
    case ActiveState::kSearching1: return {0.0, 0.0, gains.omega_search};
  }
  return {};
}

double heading_correction(double x_n, const ControllerGains& gains) {
  const double raw = gains.k_p * (x_n - 0.5);
  return std::clamp(raw, -gains.theta_max, gains.theta_max);
}

StepResult step(const ExecState& exec, const MissionInstruction& instr,
                const std::optional<Detection>& det, const ExecContext& ctx,
                std::size_t instruction_index) {
  StepResult r;
  ExecState s = exec;

  // Execute New Mission: fresh memory, then evaluate the tick normally.
  if (instr.text != s.prev_instruction) {
    s.mission = MissionState::kRunning;
    s.search = SearchState::kSearching1;
    s.searching = false;
    s.last_seen_side = Side::kUnknown;
    s.prev_instruction = instr.text;
  }

  std::optional<Detection> seen = det;
  if (seen && (!ctx.lexicon->contains(seen->label) || seen->label != instr.target_class)) {
    seen.reset();
    r.ignored_detection = true;
  }

  if (s.mission == MissionState::kSuccess) {
    // Maintain the State: success holds until the instruction changes.
  } else if (seen && seen->h >= ctx.thresholds.at(instr.target_class)) {
    s.mission = MissionState::kSuccess;
    s.searching = false;
  } else if (seen) {
    s.mission = MissionState::kRunning;
    s.searching = false;
    s.last_seen_side = seen->cx < 0.5 ? Side::kLeft : Side::kRight;
    s.search = (s.mode == StatesMode::kFour && s.last_seen_side == Side::kLeft)
                   ? SearchState::kSearching0
                   : SearchState::kSearching1;
  } else {
    s.searching = true;
    if (s.mode == StatesMode::kThree) s.search = SearchState::kSearching1;
  }

  const double corr = seen ? heading_correction(seen->cx, ctx.gains) : 0.0;
  r.command = resolve_command(s.active(), instr.speed, corr, ctx.gains);
  r.state = std::move(s);
  r.feedback = PlannerFeedback{r.state.mission, instruction_index};
  return r;
}

TraceWriter::TraceWriter(std::ostream& out, std::optional<std::uint64_t> seed) : out_(out) {
  if (seed) out_ << "# seed=" << *seed << '\n';
  out_ << "t,state,v_x,v_y,theta,det_present,x_n,y_n,w_n,h_n,conf\n";
}

void TraceWriter::write(double t, ActiveState state, const MotionCommand& cmd,
                        const std::optional<Detection>& det) {
  out_ << std::fixed << std::setprecision(4) << t << ',' << to_string(state) << ',' << cmd.v_x
       << ',' << cmd.v_y << ',' << cmd.theta << ',' << (det ? 1 : 0);
  if (det) {
    out_ << ',' << det->cx << ',' << det->cy << ',' << det->w << ',' << det->h << ','
         << det->confidence;
  } else {
    out_ << ",,,,,";
  }
  out_ << '\n';
  out_.unsetf(std::ios::floatfield);
}

}  // namespace navstack
