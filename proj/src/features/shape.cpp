#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmr/error.hpp"
#include "cmr/features.hpp"

namespace cmr {

double PrincipalAxes::major_length() const { return 4.0 * std::sqrt(lambda_major); }
double PrincipalAxes::minor_length() const { return 4.0 * std::sqrt(lambda_minor); }
double PrincipalAxes::least_length() const { return 4.0 * std::sqrt(lambda_least); }

PrincipalAxes principal_axes(const BinaryMask& mask) {
  const Grid& g = mask.grid();
  std::size_t n = 0;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int z = 0; z < g.dims[2]; ++z) {
    for (int y = 0; y < g.dims[1]; ++y) {
      for (int x = 0; x < g.dims[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        sum += Eigen::Vector3d(x * g.spacing[0], y * g.spacing[1], z * g.spacing[2]);
        ++n;
      }
    }
  }
  if (n < 2) throw DataError("principal axes need at least two voxels");
  const Eigen::Vector3d mean = sum / static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int z = 0; z < g.dims[2]; ++z) {
    for (int y = 0; y < g.dims[1]; ++y) {
      for (int x = 0; x < g.dims[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        const Eigen::Vector3d d =
            Eigen::Vector3d(x * g.spacing[0], y * g.spacing[1], z * g.spacing[2]) - mean;
        cov.noalias() += d * d.transpose();
      }
    }
  }
  cov /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov, Eigen::EigenvaluesOnly);
  // Ascending order from Eigen; round-off can leave tiny negatives.
  const Eigen::Vector3d ev = solver.eigenvalues().cwiseMax(0.0);
  return {ev[2], ev[1], ev[0]};
}

namespace {

struct Voxel {
  int x, y, z;
};

double max_pairwise(const std::vector<Voxel>& pts, const Spacing& s) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double xi = pts[i].x * s[0], yi = pts[i].y * s[1], zi = pts[i].z * s[2];
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = xi - pts[j].x * s[0];
      const double dy = yi - pts[j].y * s[1];
      const double dz = zi - pts[j].z * s[2];
      best = std::max(best, dx * dx + dy * dy + dz * dz);
    }
  }
  return best;
}

}  // namespace

// A voxel whose neighbors on both sides along every axis are set is the
// midpoint of two set voxels, so it cannot be an endpoint of a farthest pair.
// Only voxels exposed along some axis (in-plane axes for the 2D diameters)
// are therefore scanned.
Diameters max_diameters(const BinaryMask& mask) {
  if (mask.empty()) throw DataError("diameters of an empty mask");
  const Grid& g = mask.grid();
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  auto exposed_x = [&](int x, int y, int z) {
    return !(mask.test(x - 1, y, z) && mask.test(x + 1, y, z));
  };
  auto exposed_y = [&](int x, int y, int z) {
    return !(mask.test(x, y - 1, z) && mask.test(x, y + 1, z));
  };
  auto exposed_z = [&](int x, int y, int z) {
    return !(mask.test(x, y, z - 1) && mask.test(x, y, z + 1));
  };

  std::vector<Voxel> all;
  std::vector<std::vector<Voxel>> by_z(nz), by_x(nx), by_y(ny);
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        if (!mask.at(x, y, z)) continue;
        const bool ex = exposed_x(x, y, z), ey = exposed_y(x, y, z), ez = exposed_z(x, y, z);
        if (ex || ey || ez) all.push_back({x, y, z});
        if (ex || ey) by_z[z].push_back({x, y, z});
        if (ey || ez) by_x[x].push_back({x, y, z});
        if (ex || ez) by_y[y].push_back({x, y, z});
      }
    }
  }
  Diameters d;
  d.d3 = std::sqrt(max_pairwise(all, g.spacing));
  for (const auto& plane : by_z) d.d_slice = std::max(d.d_slice, max_pairwise(plane, g.spacing));
  for (const auto& plane : by_x) d.d_col = std::max(d.d_col, max_pairwise(plane, g.spacing));
  for (const auto& plane : by_y) d.d_row = std::max(d.d_row, max_pairwise(plane, g.spacing));
  d.d_slice = std::sqrt(d.d_slice);
  d.d_col = std::sqrt(d.d_col);
  d.d_row = std::sqrt(d.d_row);
  return d;
}

const std::vector<std::string>& shape_feature_kinds() {
  static const std::vector<std::string> kinds{
      "surface_area",    "surface_to_volume",  "sphericity",      "compactness1",
      "compactness2",    "spherical_disproportion", "max_diameter_3d", "max_diameter_slice",
      "max_diameter_column", "max_diameter_row", "major_axis",     "minor_axis",
      "least_axis",      "elongation",         "flatness"};
  return kinds;
}

FeatureVector shape_features(const BinaryMask& mask, const std::string& prefix) {
  using std::numbers::pi;
  if (mask.count() < 2) throw DataError("shape features need at least two voxels");
  const double volume = physical_volume_mm3(mask);
  const double area = surface_area_mm2(mask);
  const auto axes = principal_axes(mask);
  const auto diam = max_diameters(mask);

  const double radius = std::cbrt(3.0 * volume / (4.0 * pi));
  FeatureVector f;
  f.add(prefix + "surface_area", area);
  f.add(prefix + "surface_to_volume", area / volume);
  f.add(prefix + "sphericity", std::cbrt(pi) * std::pow(6.0 * volume, 2.0 / 3.0) / area);
  f.add(prefix + "compactness1", volume / (std::sqrt(pi) * std::pow(area, 1.5)));
  f.add(prefix + "compactness2", 36.0 * pi * volume * volume / (area * area * area));
  f.add(prefix + "spherical_disproportion", area / (4.0 * pi * radius * radius));
  f.add(prefix + "max_diameter_3d", diam.d3);
  f.add(prefix + "max_diameter_slice", diam.d_slice);
  f.add(prefix + "max_diameter_column", diam.d_col);
  f.add(prefix + "max_diameter_row", diam.d_row);
  f.add(prefix + "major_axis", axes.major_length());
  f.add(prefix + "minor_axis", axes.minor_length());
  f.add(prefix + "least_axis", axes.least_length());
  f.add(prefix + "elongation", std::sqrt(axes.lambda_minor / axes.lambda_major));
  f.add(prefix + "flatness", std::sqrt(axes.lambda_least / axes.lambda_major));
  return f;
}

}  // namespace cmr
