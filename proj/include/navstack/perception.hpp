#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "navstack/common.hpp"

namespace navstack {

/// Row-major 8-bit RGB image.
struct RawFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3
  double timestamp = 0.0;

  RawFrame() = default;
  RawFrame(int w, int h, double t = 0.0);

  /// Throws InvalidFrame unless the frame is at least 3x3 and sized consistently.
  void validate() const;

  std::uint8_t* pixel(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }

  bool operator==(const RawFrame&) const = default;
};

struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// BT.601 luma, rounded and clamped to [0, 255].
GrayFrame to_grayscale(const RawFrame& frame);

/// Population variance of the 4-neighbour Laplacian over interior pixels.
double laplacian_variance(const GrayFrame& gray);

/// Convenience: laplacian_variance(to_grayscale(frame)).
double sharpness(const RawFrame& frame);

struct GateStats {
  std::size_t total = 0;
  std::size_t blurred = 0;
  std::size_t pass_through = 0;
};

struct GateResult {
  RawFrame frame;
  bool was_blurred = false;
  // Blurred frame emitted as-is because no clear frame had been seen yet.
  bool pass_through = false;
  double variance = 0.0;
};

/// Replaces frames whose Laplacian variance falls strictly below the blur
/// threshold with the most recent clear frame. Single-consumer.
class FrameGate {
 public:
  static constexpr double kDefaultThreshold = 150.0;

  explicit FrameGate(double blur_threshold = kDefaultThreshold);

  GateResult gate(const RawFrame& frame);

  double threshold() const { return threshold_; }
  const GateStats& stats() const { return stats_; }
  const std::optional<RawFrame>& last_clear() const { return last_clear_; }
  void reset();

 private:
  double threshold_;
  std::optional<RawFrame> last_clear_;
  GateStats stats_;
};

/// Moving average over the last `window` detections of one class. A missing
/// detection or a class change clears the buffer.
class DetectionSmoother {
 public:
  static constexpr std::size_t kDefaultWindow = 5;

  explicit DetectionSmoother(std::size_t window = kDefaultWindow);

  std::optional<Detection> smooth(const std::optional<Detection>& det);

  std::size_t window() const { return window_; }
  std::size_t size() const { return buffer_.size(); }
  void reset() { buffer_.clear(); }

 private:
  std::size_t window_;
  std::deque<Detection> buffer_;
};

}  // namespace navstack
