#pragma once

#include <filesystem>
#include <vector>

#include "navstack/common.hpp"
#include "navstack/perception.hpp"

namespace navstack {

/// Procedural desk-scene: shaded background, rectangles, discs and a checker
/// patch. Sharp edges give Laplacian variances well above the default gate.
RawFrame render_scene(Rng& rng, int width, int height);

/// Separable Gaussian blur with clamped borders. sigma <= 0 returns a copy.
RawFrame gaussian_blur(const RawFrame& frame, double sigma);

void add_sensor_noise(RawFrame& frame, Rng& rng, double sigma);

struct BlurStream {
  std::vector<RawFrame> frames;
  std::vector<bool> blurred;  // ground truth
};

struct BlurStreamOptions {
  std::size_t count = 1000;
  double blur_fraction = 0.3;
  int width = 64;
  int height = 48;
  double min_sigma = 2.0;
  double max_sigma = 3.5;
  double noise_sigma = 1.0;
};

/// Exactly round(count * blur_fraction) frames are blurred; frame 0 is always
/// sharp so the gate never starts in pass-through.
BlurStream generate_blur_stream(const BlurStreamOptions& opts, std::uint64_t seed);

void write_blur_corpus(const std::filesystem::path& dir, const BlurStream& stream);
BlurStream read_blur_corpus(const std::filesystem::path& dir);

struct BlurBenchRow {
  double threshold = 0.0;
  double flagged_fraction = 0.0;
  double qualified_ungated = 0.0;  // share of raw frames at or above threshold
  double qualified_gated = 0.0;    // share of gate output frames at or above threshold
  double precision = 1.0;
  double recall = 1.0;
};

BlurBenchRow evaluate_blur_threshold(const BlurStream& stream, double threshold);

}  // namespace navstack
