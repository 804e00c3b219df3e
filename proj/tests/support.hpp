#pragma once

#include <cmath>
#include <functional>

#include "cmr/rng.hpp"
#include "cmr/volume.hpp"

namespace cmr::testing {

inline Grid make_grid(int nx, int ny, int nz, Spacing s = {1.0, 1.0, 1.0}) {
  return Grid{{nx, ny, nz}, s};
}

inline BinaryMask mask_from(const Grid& g, const std::function<bool(int, int, int)>& pred) {
  BinaryMask m(g);
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        if (pred(x, y, z)) m.set(x, y, z);
  return m;
}

inline LabeledVolume volume_from(const Grid& g, const std::function<int(int, int, int)>& label) {
  std::vector<std::uint8_t> labels(g.size());
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        labels[g.index(x, y, z)] = static_cast<std::uint8_t>(label(x, y, z));
  return LabeledVolume(g, std::move(labels));
}

/// Digital ball of voxel radius r centered in a cube with a margin.
inline BinaryMask digital_sphere(int r, Spacing s = {1.0, 1.0, 1.0}) {
  const int n = 2 * r + 5, c = n / 2;
  return mask_from(make_grid(n, n, n, s), [=](int x, int y, int z) {
    return (x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c) <= r * r;
  });
}

inline BinaryMask digital_ellipsoid(double a, double b, double c) {
  const int nx = 2 * static_cast<int>(a) + 5, ny = 2 * static_cast<int>(b) + 5,
            nz = 2 * static_cast<int>(c) + 5;
  const int cx = nx / 2, cy = ny / 2, cz = nz / 2;
  return mask_from(make_grid(nx, ny, nz), [=](int x, int y, int z) {
    const double u = (x - cx) / a, v = (y - cy) / b, w = (z - cz) / c;
    return u * u + v * v + w * w <= 1.0;
  });
}

inline BinaryMask random_mask(Rng& rng, int max_dim, double fill) {
  const int nx = 1 + static_cast<int>(rng.below(max_dim));
  const int ny = 1 + static_cast<int>(rng.below(max_dim));
  const int nz = 1 + static_cast<int>(rng.below(max_dim));
  const Spacing s{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 4.0)};
  BinaryMask m(make_grid(nx, ny, nz, s));
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < fill);
  if (m.empty()) m.set(rng.below(m.size()));
  return m;
}

}  // namespace cmr::testing
