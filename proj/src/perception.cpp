#include "navstack/perception.hpp"

#include <cmath>
#include <string>

namespace navstack {

RawFrame::RawFrame(int w, int h, double t)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0), timestamp(t) {}

void RawFrame::validate() const {
  if (width < 3 || height < 3) {
    throw InvalidFrame("frame " + std::to_string(width) + "x" + std::to_string(height) +
                       " is smaller than 3x3");
  }
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw InvalidFrame("frame buffer holds " + std::to_string(rgb.size()) + " bytes, expected " +
                       std::to_string(static_cast<std::size_t>(width) * height * 3));
  }
}

GrayFrame to_grayscale(const RawFrame& frame) {
  frame.validate();
  GrayFrame g{frame.width, frame.height, {}};
  const std::size_t n = static_cast<std::size_t>(frame.width) * frame.height;
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.299 * frame.rgb[3 * i] + 0.587 * frame.rgb[3 * i + 1] +
                     0.114 * frame.rgb[3 * i + 2];
    const double r = std::round(y);
    g.values[i] = static_cast<std::uint8_t>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
  }
  return g;
}

double laplacian_variance(const GrayFrame& gray) {
  if (gray.width < 3 || gray.height < 3) throw InvalidFrame("gray frame smaller than 3x3");
  const int w = gray.width;
  const int h = gray.height;
  const double count = static_cast<double>(w - 2) * (h - 2);

  // Welford keeps the variance stable for large frames.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double lap = static_cast<double>(gray.at(x - 1, y)) + gray.at(x + 1, y) +
                         gray.at(x, y - 1) + gray.at(x, y + 1) - 4.0 * gray.at(x, y);
      ++k;
      const double d = lap - mean;
      mean += d / static_cast<double>(k);
      m2 += d * (lap - mean);
    }
  }
  const double var = m2 / count;
  return var < 0.0 ? 0.0 : var;
}

double sharpness(const RawFrame& frame) { return laplacian_variance(to_grayscale(frame)); }

FrameGate::FrameGate(double blur_threshold) : threshold_(blur_threshold) {
  if (!(blur_threshold >= 0.0)) throw Error("blur threshold must be non-negative");
}

GateResult FrameGate::gate(const RawFrame& frame) {
  GateResult out;
  out.variance = sharpness(frame);
  ++stats_.total;
  if (out.variance < threshold_) {
    ++stats_.blurred;
    out.was_blurred = true;
    if (last_clear_) {
      out.frame = *last_clear_;
    } else {
      ++stats_.pass_through;
      out.pass_through = true;
      out.frame = frame;
    }
    return out;
  }
  last_clear_ = frame;
  out.frame = frame;
  return out;
}

void FrameGate::reset() {
  last_clear_.reset();
  stats_ = {};
}

DetectionSmoother::DetectionSmoother(std::size_t window) : window_(window) {
  if (window == 0) throw Error("smoother window must be positive");
}

std::optional<Detection> DetectionSmoother::smooth(const std::optional<Detection>& det) {
  if (!det) {
    buffer_.clear();
    return std::nullopt;
  }
  if (!buffer_.empty() && buffer_.back().label != det->label) buffer_.clear();
  buffer_.push_back(*det);
  while (buffer_.size() > window_) buffer_.pop_front();

  Detection mean;
  mean.label = det->label;
  mean.confidence = mean.cx = mean.cy = mean.w = mean.h = 0.0;
  for (const auto& d : buffer_) {
    mean.confidence += d.confidence;
    mean.cx += d.cx;
    mean.cy += d.cy;
    mean.w += d.w;
    mean.h += d.h;
  }
  const double n = static_cast<double>(buffer_.size());
  mean.confidence /= n;
  mean.cx /= n;
  mean.cy /= n;
  mean.w /= n;
  mean.h /= n;
  return mean;
}

}  // namespace navstack
