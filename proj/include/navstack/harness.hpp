#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "navstack/bridge.hpp"
#include "navstack/planner.hpp"
#include "navstack/policy.hpp"
#include "navstack/sim.hpp"

namespace navstack::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPostCondition = 2;
inline constexpr int kExitBridge = 3;

inline constexpr const char* kLlmBridgeEnv = "NAVSTACK_LLM_BRIDGE";
inline constexpr const char* kDetectorBridgeEnv = "NAVSTACK_DETECTOR_BRIDGE";

class UsageError : public Error {
 public:
  using Error::Error;
};

struct SubtaskOutcome {
  MissionInstruction instruction;
  bool success = false;
  double seconds = 0.0;
  std::size_t ticks = 0;
};

struct MissionSummary {
  std::uint64_t seed = 0;
  std::string task;
  std::string mode;
  bool planner_fallback = false;
  std::vector<std::string> warnings;
  std::vector<SubtaskOutcome> subtasks;

  std::size_t succeeded() const;
  nlohmann::json to_json() const;
};

struct MissionOptions {
  std::uint64_t seed = 1;
  double max_seconds = 120.0;  // per subtask
  bool continue_on_failure = true;
  bool gate = true;
  double blur_threshold = FrameGate::kDefaultThreshold;
  sim::DetectorModel detector;
};

/// Plans the task, then drives each subtask in a 2D world where every
/// planned object is placed within reach of the previous one.
MissionSummary run_mission_sim(const std::string& task, Planner& planner, Policy& policy,
                               const MissionOptions& opts, TraceWriter* trace = nullptr);

/// Frames come from a directory of PPM files (name order). Each frame passes
/// the blur gate, then goes to the detector bridge by path:
///   request  {"class": str, "frame_id": int, "frame": path}
///   response {"detections": [{"label", "conf", "cx", "cy", "w", "h"}]}
/// Commands are only traced; there is no robot on the other end.
MissionSummary run_mission_live(const std::string& task, Planner& planner, Policy& policy,
                                JsonLineTransport& detector,
                                const std::vector<std::filesystem::path>& frames,
                                const MissionOptions& opts, TraceWriter* trace = nullptr);

/// Best detection of `cls` in a detector response (highest confidence).
/// Throws BridgeError on a malformed response.
std::optional<Detection> parse_detector_response(const nlohmann::json& response,
                                                 const std::string& cls);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace navstack::harness
