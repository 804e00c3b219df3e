#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

/// Ordered, named feature values. Names are unique and values finite.
struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  void add(std::string name, double value);
  /// Throws std::out_of_range when the name is absent.
  double at(const std::string& name) const;
  void append(const FeatureVector& other);
};

enum class FeatureGroup { kVolumetric, kThickness, kShape };
enum class Phase { kED, kES, kBoth };

const char* group_name(FeatureGroup group);
const char* phase_name(Phase phase);

/// One manifest row. (group, structure, phase, params) identifies what is
/// computed; `name` is the column label.
struct ManifestEntry {
  std::string name;
  FeatureGroup group = FeatureGroup::kVolumetric;
  Label structure = Label::kLV;
  Phase phase = Phase::kED;
  std::string params;
};

struct FeatureManifest {
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<std::string> names() const;
  std::size_t count(FeatureGroup group) const;
};

/// 12 volumetric + 2x27 thickness + 59 shape = 125 features.
FeatureManifest default_manifest();
FeatureManifest read_manifest(const std::filesystem::path& path);
std::string manifest_to_csv(const FeatureManifest& manifest);

// ---------------------------------------------------------------- volumetric

/// (edv - esv) / edv. Throws DataError when edv <= 0.
double ejection_fraction(double edv_mm3, double esv_mm3);

/// LV/RV/MC volumes at ED and ES, RV/LV and MC/LV ratios at both phases, LV and RV EF.
FeatureVector volumetric_features(const SubjectStudy& study);

// ----------------------------------------------------------------- thickness

struct ThicknessSample {
  int slice = 0;
  double angle_deg = 0.0;
  double thickness_mm = 0.0;
};

struct ThicknessProfile {
  std::vector<ThicknessSample> samples;
};

/// Polar ray casting through the myocardium of every slice that contains MC.
/// Rays start at the in-slice LV centroid (MC centroid when the slice has no
/// LV) and advance in steps of half the smallest in-plane spacing; the
/// thickness is the length of the first contiguous MC run.
ThicknessProfile thickness_profile(const LabeledVolume& volume, double angular_step_deg = 1.0);

constexpr int kThicknessThresholdMin = 10;
constexpr int kThicknessThresholdMax = 30;

/// max, min, mean, median, std, variance (population), then counts of
/// samples strictly above 10, 11, ..., 30 mm. Names carry `prefix`.
FeatureVector thickness_features(const ThicknessProfile& profile, const std::string& prefix = "");

// --------------------------------------------------------------------- shape

/// Area of the 0.5 iso-surface of the binary field, triangulated per cube,
/// with spacing applied. Throws DataError for an empty mask.
double surface_area_mm2(const BinaryMask& mask);

struct PrincipalAxes {
  double lambda_major = 0, lambda_minor = 0, lambda_least = 0;

  double major_length() const;
  double minor_length() const;
  double least_length() const;
};

/// Population covariance eigenvalues of the physical voxel-center coordinates.
/// Throws DataError for fewer than two voxels.
PrincipalAxes principal_axes(const BinaryMask& mask);

struct Diameters {
  double d3 = 0, d_slice = 0, d_col = 0, d_row = 0;
};

/// Largest pairwise center distance overall and within planes of equal z
/// (slice), equal x (column) and equal y (row).
Diameters max_diameters(const BinaryMask& mask);

/// Feature kinds emitted by shape_features, in order.
const std::vector<std::string>& shape_feature_kinds();

FeatureVector shape_features(const BinaryMask& mask, const std::string& prefix = "");

// ------------------------------------------------------------------ assembly

/// Emits features in manifest order. Sub-extractor failures are rethrown as
/// DataError naming the first feature of the failing block.
FeatureVector assemble_features(const SubjectStudy& study, const FeatureManifest& manifest);

}  // namespace cmr
