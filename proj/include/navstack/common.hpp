#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace navstack {

enum class MissionState { kSuccess, kRunning };
enum class SearchState { kSearching0, kSearching1 };

std::string_view to_string(MissionState s);
std::string_view to_string(SearchState s);
MissionState parse_mission_state(std::string_view s);
SearchState parse_search_state(std::string_view s);

/// One normalized open-vocabulary detection. All geometric values and the
/// confidence live in [0, 1].
struct Detection {
  std::string label;
  double confidence = 0.0;
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.0;
  double h = 0.0;

  bool valid() const;
  bool operator==(const Detection&) const = default;
};

/// Velocity command [v_x, v_y, theta]: forward m/s, lateral m/s, yaw rate rad/s.
/// Positive theta turns right (clockwise seen from above).
struct MotionCommand {
  double v_x = 0.0;
  double v_y = 0.0;
  double theta = 0.0;

  bool operator==(const MotionCommand&) const = default;
};

struct MissionInstruction {
  std::string text;
  std::string target_class;
  double speed = 0.4;

  bool operator==(const MissionInstruction&) const = default;
};

struct PlannerFeedback {
  MissionState state = MissionState::kRunning;
  std::size_t index = 0;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidFrame : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class BridgeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Portable seeded generator. The distributions are implemented here rather
/// than taken from <random> so that streams are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  std::size_t index(std::size_t n);  // [0, n)
  double normal();
  bool bernoulli(double p);

  /// Derives an independent stream from (seed, a, b).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

 private:
  std::array<std::uint64_t, 4> s_{};
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

double clamp01(double v);

/// Rounds half away from zero to two decimals, the resolution of the
/// numeric bucket tokens.
double round2(double v);

}  // namespace navstack
