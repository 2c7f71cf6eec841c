#include "navstack/common.hpp"

#include <cmath>

namespace navstack {

std::string_view to_string(MissionState s) {
  return s == MissionState::kSuccess ? "success" : "running";
}

std::string_view to_string(SearchState s) {
  return s == SearchState::kSearching0 ? "searching_0" : "searching_1";
}

MissionState parse_mission_state(std::string_view s) {
  if (s == "success") return MissionState::kSuccess;
  if (s == "running") return MissionState::kRunning;
  throw Error("unknown mission state '" + std::string(s) + "'");
}

SearchState parse_search_state(std::string_view s) {
  if (s == "searching_0") return SearchState::kSearching0;
  if (s == "searching_1") return SearchState::kSearching1;
  throw Error("unknown search state '" + std::string(s) + "'");
}

bool Detection::valid() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  return in01(confidence) && in01(cx) && in01(cy) && in01(w) && in01(h);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& w : s_) {
    x = splitmix64(x);
    w = x;
  }
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

std::uint64_t Rng::next_u64() {
  // xoshiro256**
  auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::index(std::size_t n) {
  // Lemire's multiply-shift; the bias is below 2^-64 * n.
  const auto m = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_normal_ = r * std::sin(2.0 * M_PI * u2);
  return r * std::cos(2.0 * M_PI * u2);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double round2(double v) {
  // The epsilon absorbs binary representation error (0.875 stored as 0.87499...).
  return std::copysign(std::floor(std::fabs(v) * 100.0 + 0.5 + 1e-9), v) / 100.0;
}

}  // namespace navstack
