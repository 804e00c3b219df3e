#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cmr/error.hpp"
#include "cmr/features.hpp"

namespace cmr {

namespace {

struct Centroid {
  double x = 0, y = 0;
  std::size_t n = 0;
};

Centroid slice_centroid(const LabeledVolume& v, int z, std::uint8_t label) {
  Centroid c;
  const Grid& g = v.grid();
  for (int y = 0; y < g.dims[1]; ++y) {
    for (int x = 0; x < g.dims[0]; ++x) {
      if (v.at(x, y, z) != label) continue;
      c.x += x * g.spacing[0];
      c.y += y * g.spacing[1];
      ++c.n;
    }
  }
  if (c.n > 0) {
    c.x /= static_cast<double>(c.n);
    c.y /= static_cast<double>(c.n);
  }
  return c;
}

}  // namespace

ThicknessProfile thickness_profile(const LabeledVolume& volume, double angular_step_deg) {
  const double steps_real = 360.0 / angular_step_deg;
  const long n_angles = std::lround(steps_real);
  if (!(angular_step_deg > 0.0) || n_angles < 1 || std::abs(steps_real - n_angles) > 1e-9) {
    throw UsageError("angular step must divide 360 degrees");
  }
  const Grid& g = volume.grid();
  const auto mc = static_cast<std::uint8_t>(Label::kMC);
  const auto lv = static_cast<std::uint8_t>(Label::kLV);
  const double step = 0.5 * std::min(g.spacing[0], g.spacing[1]);

  ThicknessProfile profile;
  for (int z = 0; z < g.dims[2]; ++z) {
    const Centroid mc_c = slice_centroid(volume, z, mc);
    if (mc_c.n == 0) continue;
    Centroid origin = slice_centroid(volume, z, lv);
    if (origin.n == 0) origin = mc_c;

    for (long a = 0; a < n_angles; ++a) {
      const double angle = static_cast<double>(a) * angular_step_deg;
      const double rad = angle * std::numbers::pi / 180.0;
      const double dx = std::cos(rad), dy = std::sin(rad);
      std::size_t run = 0;
      for (long k = 0;; ++k) {
        const double t = static_cast<double>(k) * step;
        const long ix = std::lround((origin.x + t * dx) / g.spacing[0]);
        const long iy = std::lround((origin.y + t * dy) / g.spacing[1]);
        if (!g.contains(static_cast<int>(ix), static_cast<int>(iy), z)) break;
        if (volume.at(static_cast<int>(ix), static_cast<int>(iy), z) == mc) {
          ++run;
        } else if (run > 0) {
          break;
        }
      }
      profile.samples.push_back({z, angle, static_cast<double>(run) * step});
    }
  }
  if (profile.samples.empty()) throw DataError("no myocardium voxels for thickness");
  return profile;
}

FeatureVector thickness_features(const ThicknessProfile& profile, const std::string& prefix) {
  if (profile.samples.empty()) throw DataError("empty thickness profile");
  std::vector<double> t;
  t.reserve(profile.samples.size());
  for (const auto& s : profile.samples) t.push_back(s.thickness_mm);
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  double sum = 0.0;
  for (double v : t) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : t) ss += (v - mean) * (v - mean);
  const double variance = ss / static_cast<double>(n);
  const double median = n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);

  FeatureVector f;
  f.add(prefix + "max", t.back());
  f.add(prefix + "min", t.front());
  f.add(prefix + "mean", mean);
  f.add(prefix + "median", median);
  f.add(prefix + "std", std::sqrt(variance));
  f.add(prefix + "variance", variance);
  for (int thr = kThicknessThresholdMin; thr <= kThicknessThresholdMax; ++thr) {
    const auto above = std::count_if(t.begin(), t.end(), [thr](double v) { return v > thr; });
    f.add(prefix + "count_gt_" + std::to_string(thr), static_cast<double>(above));
  }
  return f;
}

}  // namespace cmr
