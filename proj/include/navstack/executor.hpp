#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "navstack/common.hpp"
#include "navstack/lexicon.hpp"

namespace navstack {

enum class Side { kUnknown, kLeft, kRight };
enum class StatesMode { kThree, kFour };

/// What currently drives the command: the mission state or a search state.
enum class ActiveState { kSuccess, kRunning, kSearching0, kSearching1 };

std::string_view to_string(Side s);
std::string_view to_string(StatesMode m);
std::string_view to_string(ActiveState a);
StatesMode parse_states_mode(std::string_view s);

struct ExecState {
  MissionState mission = MissionState::kRunning;
  // Search state to use once the target is lost. While running it is kept
  // pre-armed from the last sighting, so it is meaningful in every state.
  SearchState search = SearchState::kSearching1;
  bool searching = false;
  std::string prev_instruction;
  Side last_seen_side = Side::kUnknown;
  StatesMode mode = StatesMode::kFour;

  ActiveState active() const;
  bool operator==(const ExecState&) const = default;
};

struct ControllerGains {
  double k_p = 1.0;
  double theta_max = 0.6;
  double omega_search = 0.3;

  void validate() const;
};

/// Success thresholds on detection height h_n, per class.
class ThresholdTable {
 public:
  static constexpr double kDefault = 0.55;

  ThresholdTable() = default;
  explicit ThresholdTable(std::map<std::string, double> values, double fallback = kDefault);

  /// person .60, chair .50, backpack .45, car .65, sports ball .40; others .55.
  static ThresholdTable defaults();

  double at(const std::string& cls) const;
  void set(const std::string& cls, double tau);
  double fallback() const { return fallback_; }
  const std::map<std::string, double>& values() const { return values_; }

 private:
  std::map<std::string, double> values_;
  double fallback_ = kDefault;
};

/// Table-1 mapping from the active state to a velocity command.
MotionCommand resolve_command(ActiveState state, double speed, double theta_corr,
                              const ControllerGains& gains = {});

/// Proportional heading law, clamped to +-theta_max. Positive theta turns
/// right, so a target left of centre (x_n < 0.5) yields a negative rate.
double heading_correction(double x_n, const ControllerGains& gains = {});

struct StepResult {
  MotionCommand command;
  ExecState state;
  PlannerFeedback feedback;
  bool ignored_detection = false;  // foreign or off-target label treated as absent
};

struct ExecContext {
  const ClassLexicon* lexicon = &ClassLexicon::standard();
  ThresholdTable thresholds = ThresholdTable::defaults();
  ControllerGains gains;
};

/// One control tick of the execution rules. Pure: the result depends only
/// on the arguments.
StepResult step(const ExecState& exec, const MissionInstruction& instr,
                const std::optional<Detection>& det, const ExecContext& ctx,
                std::size_t instruction_index = 0);

struct ExecDiagnostics {
  std::uint64_t ticks = 0;
  std::uint64_t ignored_detections = 0;
};

/// Per-tick CSV trace: t,state,v_x,v_y,theta,det_present,x_n,y_n,w_n,h_n,conf
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out, std::optional<std::uint64_t> seed = std::nullopt);
  void write(double t, ActiveState state, const MotionCommand& cmd,
             const std::optional<Detection>& det);

 private:
  std::ostream& out_;
};

}  // namespace navstack
