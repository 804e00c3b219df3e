#pragma once

#include <optional>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

struct SegScore {
  double dice = 0.0;
  /// Empty when either mask has no voxels.
  std::optional<double> hausdorff_mm;
};

/// 2|A∩B| / (|A| + |B|); 1 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Physical centers of true voxels with at least one 6-neighbor that is false
/// or outside the grid, in scan order.
std::vector<Point3> boundary_points(const BinaryMask& mask);

/// Symmetric maximum Hausdorff distance between the boundary point sets, mm.
/// Throws DataError if either mask is empty or the grids differ.
double hausdorff(const BinaryMask& a, const BinaryMask& b);

SegScore score_masks(const BinaryMask& predicted, const BinaryMask& truth);

}  // namespace cmr
