#include "cmr/postprocess.hpp"

#include <array>
#include <cstdlib>
#include <string>

#include "cmr/error.hpp"

namespace cmr {

Connectivity connectivity_from_int(int value) {
  if (value == 6) return Connectivity::k6;
  if (value == 26) return Connectivity::k26;
  throw UsageError("connectivity must be 6 or 26, got " + std::to_string(value));
}

namespace {

struct Offset {
  int dx, dy, dz;
};

std::vector<Offset> neighborhood(Connectivity connectivity) {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (connectivity == Connectivity::k6 && manhattan != 1) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

}  // namespace

ComponentLabeling connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const Grid& g = mask.grid();
  ComponentLabeling out;
  out.grid = g;
  out.component_id.assign(g.size(), 0);
  const auto offsets = neighborhood(connectivity);

  // Breadth-first flood fill seeded in scan order, so ids follow the scan
  // position of each component's first voxel.
  std::vector<std::array<int, 3>> queue;
  std::uint32_t next_id = 0;
  for (int z = 0; z < g.dims[2]; ++z) {
    for (int y = 0; y < g.dims[1]; ++y) {
      for (int x = 0; x < g.dims[0]; ++x) {
        const std::size_t seed = g.index(x, y, z);
        if (!mask[seed] || out.component_id[seed] != 0) continue;
        const std::uint32_t id = ++next_id;
        std::size_t size = 0;
        queue.clear();
        queue.push_back({x, y, z});
        out.component_id[seed] = id;
        for (std::size_t head = 0; head < queue.size(); ++head) {
          const auto [cx, cy, cz] = queue[head];
          ++size;
          for (const auto& o : offsets) {
            const int nx = cx + o.dx, ny = cy + o.dy, nz = cz + o.dz;
            if (!g.contains(nx, ny, nz)) continue;
            const std::size_t n = g.index(nx, ny, nz);
            if (mask[n] && out.component_id[n] == 0) {
              out.component_id[n] = id;
              queue.push_back({nx, ny, nz});
            }
          }
        }
        out.component_sizes.push_back(size);
      }
    }
  }
  return out;
}

LabeledVolume keep_largest_component(const LabeledVolume& volume, Connectivity connectivity) {
  const auto cc = connected_components(foreground_mask(volume), connectivity);
  if (cc.count() <= 1) return volume;
  std::uint32_t keep = 1;
  for (std::uint32_t c = 2; c <= cc.count(); ++c) {
    if (cc.component_sizes[c - 1] > cc.component_sizes[keep - 1]) keep = c;
  }
  std::vector<std::uint8_t> labels = volume.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (cc.component_id[i] != keep) labels[i] = 0;
  }
  return LabeledVolume(volume.grid(), std::move(labels));
}

}  // namespace cmr
