#pragma once

#include <cstdint>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

enum class Connectivity { k6 = 6, k26 = 26 };

/// Throws UsageError for anything other than 6 or 26.
Connectivity connectivity_from_int(int value);

/// Component id per voxel (0 = background) with ids numbered 1..C in the
/// scan order of each component's first voxel.
struct ComponentLabeling {
  Grid grid;
  std::vector<std::uint32_t> component_id;
  /// component_sizes[c - 1] is the voxel count of component c.
  std::vector<std::size_t> component_sizes;

  std::size_t count() const { return component_sizes.size(); }
};

ComponentLabeling connected_components(const BinaryMask& mask,
                                       Connectivity connectivity = Connectivity::k26);

/// Zeroes every voxel outside the largest connected component of the union of
/// all foreground labels. Labels inside the kept component are untouched.
/// Equal sizes resolve to the lowest component id.
LabeledVolume keep_largest_component(const LabeledVolume& volume,
                                     Connectivity connectivity = Connectivity::k26);

}  // namespace cmr
