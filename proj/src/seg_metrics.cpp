#include "cmr/seg_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cmr/error.hpp"

namespace cmr {

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.dims() != b.dims()) throw DataError("mask dimensions differ");
}

double squared_distance(const Point3& p, const Point3& q) {
  const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
  return dx * dx + dy * dy + dz * dz;
}

// max_{p in from} min_{q in to} |p - q|^2, with the early-break scan: once a
// q closer than the running maximum is found, p cannot raise the maximum.
double directed_squared(const std::vector<Point3>& from, const std::vector<Point3>& to) {
  double cmax = 0.0;
  for (const auto& p : from) {
    double cmin = std::numeric_limits<double>::infinity();
    for (const auto& q : to) {
      const double d = squared_distance(p, q);
      if (d < cmin) {
        cmin = d;
        if (cmin <= cmax) break;
      }
    }
    if (cmin > cmax) cmax = cmin;
  }
  return cmax;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b);
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
    both += a[i] && b[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<Point3> boundary_points(const BinaryMask& mask) {
  const Grid& g = mask.grid();
  std::vector<Point3> points;
  for (int z = 0; z < g.dims[2]; ++z) {
    for (int y = 0; y < g.dims[1]; ++y) {
      for (int x = 0; x < g.dims[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        const bool interior = mask.test(x - 1, y, z) && mask.test(x + 1, y, z) &&
                              mask.test(x, y - 1, z) && mask.test(x, y + 1, z) &&
                              mask.test(x, y, z - 1) && mask.test(x, y, z + 1);
        if (!interior) points.push_back(g.center(x, y, z));
      }
    }
  }
  return points;
}

double hausdorff(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b);
  if (a.spacing() != b.spacing()) throw DataError("mask spacings differ");
  const auto pa = boundary_points(a);
  const auto pb = boundary_points(b);
  if (pa.empty() || pb.empty()) {
    throw DataError("Hausdorff distance undefined for an empty mask");
  }
  return std::sqrt(std::max(directed_squared(pa, pb), directed_squared(pb, pa)));
}

SegScore score_masks(const BinaryMask& predicted, const BinaryMask& truth) {
  SegScore score;
  score.dice = dice(predicted, truth);
  if (!predicted.empty() && !truth.empty()) score.hausdorff_mm = hausdorff(predicted, truth);
  return score;
}

}  // namespace cmr
