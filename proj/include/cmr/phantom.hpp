#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

/// Nominal geometry of one phantom class; every subject jitters around it.
struct PhantomClass {
  std::string name;
  double lv_radius_mm = 22.0;
  double mc_thickness_mm = 8.0;
  double lv_ef = 0.6;
  /// Extra RV circle radius beyond half the epicardial radius.
  double rv_size_mm = 10.0;
  double rv_ef = 0.55;
  /// Angular width of a thinned myocardial sector (0 = none).
  double sector_deg = 0.0;
  /// Thickness multiplier inside the sector.
  double sector_thinning = 1.0;
};

/// normal, dilated, hypertrophic, infarct, abnormal_rv.
std::vector<PhantomClass> default_phantom_classes();

struct PhantomSpec {
  int class_id = 0;
  PhantomClass profile;
  Dims dims{64, 64, 10};
  Spacing spacing{2.0, 2.0, 8.0};
  std::uint64_t seed = 0;
  /// Relative standard deviation of size parameters.
  double jitter = 0.05;
  /// Standard deviation of the ejection fractions.
  double ef_jitter = 0.03;
};

/// Stacked short-axis slices: LV disk inside an MC annulus with an RV crescent
/// on one side, tapering toward the apex. ES shrinks the LV cavity so its
/// volume falls by the class EF, keeps myocardial area per slice, and shrinks
/// the RV crescent by the RV EF. Throws DataError if the heart does not fit.
SubjectStudy generate_phantom(const PhantomSpec& spec);

/// `per_class` subjects for each class, ids P000.., subject i seeded with
/// derive_seed(seed, i), ordered class by class.
std::vector<SubjectStudy> generate_cohort(const std::vector<PhantomClass>& classes, int per_class,
                                          std::uint64_t seed, const Dims& dims = {64, 64, 10},
                                          const Spacing& spacing = {2.0, 2.0, 8.0});

struct PerturbParams {
  /// Boundary relabeling passes.
  int boundary_noise_voxels = 0;
  /// Chance per boundary voxel per pass of taking a neighbor's label.
  double flip_probability = 0.3;
  /// Expected spurious blobs per slice.
  double spurious_blob_rate = 0.0;
  int blob_size = 3;
  std::uint64_t seed = 0;
};

/// In-plane boundary jitter followed by square blobs of random labels placed
/// at least two voxels (Chebyshev, in 3D) from any foreground. Zero noise and
/// rate is the identity.
LabeledVolume perturb_segmentation(const LabeledVolume& volume, const PerturbParams& params);

}  // namespace cmr
