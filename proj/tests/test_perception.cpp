#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "navstack/blur_corpus.hpp"
#include "navstack/image_io.hpp"
#include "navstack/perception.hpp"

using namespace navstack;

namespace {

RawFrame gray_frame(int w, int h, const std::vector<int>& values) {
  RawFrame f(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto* p = f.pixel(x, y);
      p[0] = p[1] = p[2] = static_cast<std::uint8_t>(values[y * w + x]);
    }
  return f;
}

// Independent oracle: direct double loop over the 4-neighbour stencil, then
// a two-pass population variance.
double brute_force_variance(const std::vector<int>& g, int w, int h) {
  std::vector<double> lap;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      double s = 0.0;
      const int dx[] = {0, 0, -1, 1, 0};
      const int dy[] = {-1, 1, 0, 0, 0};
      const double k[] = {1, 1, 1, 1, -4};
      for (int i = 0; i < 5; ++i) s += k[i] * g[(y + dy[i]) * w + (x + dx[i])];
      lap.push_back(s);
    }
  double mean = 0.0;
  for (double v : lap) mean += v;
  mean /= lap.size();
  double var = 0.0;
  for (double v : lap) var += (v - mean) * (v - mean);
  return var / lap.size();
}

std::vector<int> read_pgm_ascii(const std::filesystem::path& p, int& w, int& h) {
  std::ifstream in(p);
  std::string magic;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  REQUIRE(magic == "P2");
  std::vector<int> v(static_cast<std::size_t>(w) * h);
  for (auto& x : v) in >> x;
  return v;
}

RawFrame sharp_frame(std::uint64_t seed = 3) {
  Rng rng(seed);
  return render_scene(rng, 64, 48);
}

}  // namespace

TEST_SUITE("perception") {

TEST_CASE("grayscale conversion") {
  RawFrame black(3, 3);
  for (auto v : to_grayscale(black).values) CHECK(v == 0);

  RawFrame white(3, 3);
  std::fill(white.rgb.begin(), white.rgb.end(), 255);
  for (auto v : to_grayscale(white).values) CHECK(v == 255);

  RawFrame red(3, 3);
  red.pixel(1, 1)[0] = 255;
  CHECK(to_grayscale(red).at(1, 1) == 76);

  CHECK_THROWS_AS(to_grayscale(RawFrame(2, 5)), InvalidFrame);
  RawFrame broken(4, 4);
  broken.rgb.pop_back();
  CHECK_THROWS_AS(to_grayscale(broken), InvalidFrame);
}

TEST_CASE("laplacian variance on the shipped 4x4 image matches the brute-force oracle") {
  int w = 0, h = 0;
  const auto g = read_pgm_ascii(std::filesystem::path(NAVSTACK_TEST_DATA) / "lap4x4.pgm", w, h);
  REQUIRE(w == 4);
  REQUIRE(h == 4);
  const double oracle = brute_force_variance(g, w, h);
  // Interior responses are -1020, 355, 355, -400.
  CHECK(oracle == doctest::Approx(331606.25).epsilon(1e-12));
  CHECK(laplacian_variance(to_grayscale(gray_frame(w, h, g))) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("laplacian variance: constants and offsets") {
  CHECK(laplacian_variance(to_grayscale(gray_frame(5, 5, std::vector<int>(25, 77)))) == 0.0);

  Rng rng(11);
  std::vector<int> base(12 * 9);
  for (auto& v : base) v = static_cast<int>(rng.index(200));
  auto shifted = base;
  for (auto& v : shifted) v += 37;
  const double a = laplacian_variance(to_grayscale(gray_frame(12, 9, base)));
  const double b = laplacian_variance(to_grayscale(gray_frame(12, 9, shifted)));
  CHECK(a > 0.0);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
  CHECK(brute_force_variance(base, 12, 9) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("laplacian variance is non-negative and matches the oracle on random frames") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int w = 3 + static_cast<int>(rng.index(10));
    const int h = 3 + static_cast<int>(rng.index(10));
    std::vector<int> g(static_cast<std::size_t>(w) * h);
    for (auto& v : g) v = static_cast<int>(rng.index(256));
    const double v = laplacian_variance(to_grayscale(gray_frame(w, h, g)));
    CHECK(v >= 0.0);
    CHECK(v == doctest::Approx(brute_force_variance(g, w, h)).epsilon(1e-9));
  }
}

TEST_CASE("gate keeps sharp frames") {
  const auto f = sharp_frame();
  REQUIRE(sharpness(f) > 400.0);
  FrameGate gate(150.0);
  const auto r = gate.gate(f);
  CHECK_FALSE(r.was_blurred);
  CHECK(r.frame == f);
}

TEST_CASE("gate comparison is strict") {
  const auto clear = sharp_frame(1);
  const auto soft = gaussian_blur(sharp_frame(2), 0.8);
  const double v = sharpness(soft);
  REQUIRE(v > 0.0);

  // Threshold scaled so that the soft frame sits at 149.99 of 150.
  FrameGate gate(v * 150.0 / 149.99);
  gate.gate(clear);
  const auto r = gate.gate(soft);
  CHECK(r.was_blurred);
  CHECK(r.frame == clear);

  FrameGate exact(v);
  CHECK_FALSE(exact.gate(soft).was_blurred);
}

TEST_CASE("gate on a clean stream never substitutes") {
  FrameGate gate;
  for (int i = 0; i < 10; ++i) {
    const auto f = sharp_frame(100 + i);
    CHECK_FALSE(gate.gate(f).was_blurred);
  }
  CHECK(gate.stats().blurred == 0);
  CHECK(gate.stats().total == 10);
}

TEST_CASE("gate startup passes the blurred frame through and counts it") {
  FrameGate gate;
  const auto blurred = gaussian_blur(sharp_frame(), 3.0);
  const auto r = gate.gate(blurred);
  CHECK(r.was_blurred);
  CHECK(r.pass_through);
  CHECK(r.frame == blurred);
  CHECK(gate.stats().blurred == 1);
  CHECK(gate.stats().pass_through == 1);
}

TEST_CASE("gate output is never below threshold after the first clear frame") {
  const auto stream = generate_blur_stream({.count = 200, .blur_fraction = 0.4}, 9);
  FrameGate gate;
  for (const auto& f : stream.frames) {
    const auto r = gate.gate(f);
    if (!r.pass_through) CHECK(sharpness(r.frame) >= gate.threshold());
  }
}

TEST_CASE("smoother averages detections") {
  Detection d{"person", 0.9, 0.4, 0.5, 0.2, 0.3};
  DetectionSmoother s5(5);
  CHECK(*s5.smooth(d) == d);

  DetectionSmoother s2(2);
  auto a = d;
  a.confidence = 0.6;
  auto b = d;
  b.confidence = 0.8;
  s2.smooth(a);
  CHECK(s2.smooth(b)->confidence == doctest::Approx(0.7));

  DetectionSmoother same(5);
  std::optional<Detection> out;
  for (int i = 0; i < 5; ++i) out = same.smooth(d);
  CHECK(out->cx == doctest::Approx(d.cx));
  CHECK(out->h == doctest::Approx(d.h));
  CHECK(out->confidence == doctest::Approx(d.confidence));
}

TEST_CASE("smoother resets on absence and stays within the buffered range") {
  DetectionSmoother s(3);
  s.smooth(Detection{"chair", 0.5, 0.1, 0.5, 0.1, 0.1});
  CHECK_FALSE(s.smooth(std::nullopt).has_value());
  CHECK(s.size() == 0);

  Rng rng(2);
  DetectionSmoother conv(4);
  std::deque<Detection> recent;
  for (int i = 0; i < 2000; ++i) {
    Detection d{"chair", rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    recent.push_back(d);
    if (recent.size() > 4) recent.pop_front();
    const auto o = *conv.smooth(d);
    double lo = 1.0, hi = 0.0;
    for (const auto& r : recent) {
      lo = std::min(lo, r.cx);
      hi = std::max(hi, r.cx);
    }
    CHECK(o.cx >= lo - 1e-12);
    CHECK(o.cx <= hi + 1e-12);
  }
}

TEST_CASE("PPM and manifest round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "navstack_ppm_test";
  std::filesystem::create_directories(dir);
  const auto f = sharp_frame();
  write_ppm(dir / "a.ppm", f);
  const auto back = read_ppm(dir / "a.ppm");
  CHECK(back.width == f.width);
  CHECK(back.rgb == f.rgb);

  write_manifest(dir / "manifest.txt", {{"a.ppm", false}, {"b.ppm", true}});
  const auto m = read_manifest(dir / "manifest.txt");
  REQUIRE(m.size() == 2);
  CHECK(m[1].filename == "b.ppm");
  CHECK(m[1].blurred);
  std::filesystem::remove_all(dir);
}

TEST_CASE("blur corpus: 30% injected blur is flagged at T = 150") {
  const auto stream = generate_blur_stream({.count = 500, .blur_fraction = 0.3}, 4);
  const auto r = evaluate_blur_threshold(stream, 150.0);
  CHECK(std::abs(r.flagged_fraction - 0.3) <= 0.02);
  CHECK(r.precision >= 0.99);
  CHECK(r.recall >= 0.99);
  CHECK(evaluate_blur_threshold(stream, 0.0).qualified_ungated == 1.0);
  CHECK(evaluate_blur_threshold(stream, 0.0).qualified_gated == 1.0);

  const auto dir = std::filesystem::temp_directory_path() / "navstack_blur_corpus_test";
  std::filesystem::remove_all(dir);
  write_blur_corpus(dir, stream);
  const auto back = read_blur_corpus(dir);
  CHECK(back.blurred == stream.blurred);
  CHECK(back.frames.size() == stream.frames.size());
  CHECK(back.frames[7].rgb == stream.frames[7].rgb);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
