#include "navstack/blur_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "navstack/image_io.hpp"

namespace navstack {

namespace {

std::uint8_t to_u8(double v) {
  const double r = std::round(v);
  return static_cast<std::uint8_t>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
}

void fill_rect(RawFrame& f, int x0, int y0, int x1, int y1, const std::array<int, 3>& c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, f.width);
  y1 = std::min(y1, f.height);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int k = 0; k < 3; ++k) f.pixel(x, y)[k] = static_cast<std::uint8_t>(c[k]);
}

std::array<int, 3> random_colour(Rng& rng) {
  return {static_cast<int>(rng.index(256)), static_cast<int>(rng.index(256)),
          static_cast<int>(rng.index(256))};
}

}  // namespace

RawFrame render_scene(Rng& rng, int width, int height) {
  RawFrame f(width, height);
  const auto top = random_colour(rng);
  const auto bottom = random_colour(rng);
  for (int y = 0; y < height; ++y) {
    const double t = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
    for (int x = 0; x < width; ++x)
      for (int k = 0; k < 3; ++k) f.pixel(x, y)[k] = to_u8(top[k] * (1 - t) + bottom[k] * t);
  }

  const int rects = 4 + static_cast<int>(rng.index(5));
  for (int i = 0; i < rects; ++i) {
    const int x0 = static_cast<int>(rng.index(width));
    const int y0 = static_cast<int>(rng.index(height));
    const int rw = 4 + static_cast<int>(rng.index(width / 2));
    const int rh = 4 + static_cast<int>(rng.index(height / 2));
    fill_rect(f, x0, y0, x0 + rw, y0 + rh, random_colour(rng));
  }

  const int discs = 2 + static_cast<int>(rng.index(3));
  for (int i = 0; i < discs; ++i) {
    const double cx = rng.uniform(0, width);
    const double cy = rng.uniform(0, height);
    const double r = rng.uniform(3.0, std::min(width, height) / 4.0);
    const auto c = random_colour(rng);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
          for (int k = 0; k < 3; ++k) f.pixel(x, y)[k] = static_cast<std::uint8_t>(c[k]);
  }

  // Checker patch: dense high-frequency content.
  const int cs = 2 + static_cast<int>(rng.index(3));
  const int px = static_cast<int>(rng.index(std::max(1, width - 12)));
  const int py = static_cast<int>(rng.index(std::max(1, height - 12)));
  const auto a = random_colour(rng);
  const auto b = random_colour(rng);
  for (int y = py; y < std::min(height, py + 12); ++y)
    for (int x = px; x < std::min(width, px + 12); ++x) {
      const bool odd = (((x - px) / cs) + ((y - py) / cs)) % 2 == 1;
      for (int k = 0; k < 3; ++k) f.pixel(x, y)[k] = static_cast<std::uint8_t>(odd ? a[k] : b[k]);
    }
  return f;
}

RawFrame gaussian_blur(const RawFrame& frame, double sigma) {
  frame.validate();
  if (sigma <= 0.0) return frame;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  const int w = frame.width;
  const int h = frame.height;
  std::vector<double> tmp(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + radius] * frame.pixel(xx, y)[c];
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
  RawFrame out(w, h, frame.timestamp);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + radius] * tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
        }
        out.pixel(x, y)[c] = to_u8(acc);
      }
  return out;
}

void add_sensor_noise(RawFrame& frame, Rng& rng, double sigma) {
  if (sigma <= 0.0) return;
  for (auto& v : frame.rgb) v = to_u8(v + sigma * rng.normal());
}

BlurStream generate_blur_stream(const BlurStreamOptions& opts, std::uint64_t seed) {
  if (opts.count == 0) throw Error("blur stream needs at least one frame");
  if (opts.blur_fraction < 0.0 || opts.blur_fraction > 1.0) throw Error("blur fraction outside [0,1]");
  Rng rng(seed);
  const auto n_blur = std::min<std::size_t>(
      opts.count - 1, static_cast<std::size_t>(std::llround(opts.blur_fraction * opts.count)));

  std::vector<std::size_t> idx(opts.count - 1);
  std::iota(idx.begin(), idx.end(), 1);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);

  BlurStream s;
  s.blurred.assign(opts.count, false);
  for (std::size_t i = 0; i < n_blur; ++i) s.blurred[idx[i]] = true;

  s.frames.reserve(opts.count);
  for (std::size_t i = 0; i < opts.count; ++i) {
    RawFrame f = render_scene(rng, opts.width, opts.height);
    if (s.blurred[i]) f = gaussian_blur(f, rng.uniform(opts.min_sigma, opts.max_sigma));
    add_sensor_noise(f, rng, opts.noise_sigma);
    f.timestamp = static_cast<double>(i) / 15.0;
    s.frames.push_back(std::move(f));
  }
  return s;
}

void write_blur_corpus(const std::filesystem::path& dir, const BlurStream& stream) {
  std::filesystem::create_directories(dir);
  std::vector<CorpusEntry> entries;
  for (std::size_t i = 0; i < stream.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.ppm", i);
    write_ppm(dir / name, stream.frames[i]);
    entries.push_back({name, stream.blurred[i]});
  }
  write_manifest(dir / "manifest.txt", entries);
}

BlurStream read_blur_corpus(const std::filesystem::path& dir) {
  BlurStream s;
  for (const auto& e : read_manifest(dir / "manifest.txt")) {
    s.frames.push_back(read_ppm(dir / e.filename));
    s.blurred.push_back(e.blurred);
  }
  return s;
}

BlurBenchRow evaluate_blur_threshold(const BlurStream& stream, double threshold) {
  BlurBenchRow row;
  row.threshold = threshold;
  FrameGate gate(threshold);
  std::size_t tp = 0, fp = 0, fn = 0, raw_ok = 0, gated_ok = 0;
  for (std::size_t i = 0; i < stream.frames.size(); ++i) {
    const GateResult r = gate.gate(stream.frames[i]);
    if (r.variance >= threshold) ++raw_ok;
    // Substituted frames are clear by construction; only pass-through fails.
    if (!r.was_blurred || !r.pass_through) ++gated_ok;
    const bool truth = stream.blurred[i];
    if (r.was_blurred && truth) ++tp;
    if (r.was_blurred && !truth) ++fp;
    if (!r.was_blurred && truth) ++fn;
  }
  const double n = static_cast<double>(stream.frames.size());
  row.flagged_fraction = static_cast<double>(gate.stats().blurred) / n;
  row.qualified_ungated = static_cast<double>(raw_ok) / n;
  row.qualified_gated = static_cast<double>(gated_ok) / n;
  row.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  row.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
  return row;
}

}  // namespace navstack
