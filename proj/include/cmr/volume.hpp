#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cmr {

/// Anatomical label codes stored in every voxel.
enum class Label : std::uint8_t { kBackground = 0, kRV = 1, kMC = 2, kLV = 3 };

constexpr std::uint8_t kMaxLabel = 3;

const char* label_name(Label label);

using Dims = std::array<int, 3>;
using Spacing = std::array<double, 3>;

/// Physical point in mm.
struct Point3 {
  double x = 0, y = 0, z = 0;
};

/// Shared geometry of every voxel grid: dimensions and mm-per-voxel spacing.
/// Voxels are stored x-fastest, then y, then z.
struct Grid {
  Dims dims{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(y) +
                                                static_cast<std::size_t>(dims[1]) * z);
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }
  double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }
  Point3 center(int x, int y, int z) const {
    return {x * spacing[0], y * spacing[1], z * spacing[2]};
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Throws DataError unless dims are positive and spacing is positive and finite.
void validate_grid(const Grid& grid);

/// 3D label map with physical spacing. Immutable once constructed.
class LabeledVolume {
 public:
  LabeledVolume() = default;
  /// Validates every invariant; throws DataError on violation.
  LabeledVolume(Grid grid, std::vector<std::uint8_t> labels);
  /// All-background volume.
  explicit LabeledVolume(Grid grid);

  const Grid& grid() const { return grid_; }
  const Dims& dims() const { return grid_.dims; }
  const Spacing& spacing() const { return grid_.spacing; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::uint8_t>& labels() const { return labels_; }

  std::uint8_t at(int x, int y, int z) const { return labels_[grid_.index(x, y, z)]; }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }

  friend bool operator==(const LabeledVolume&, const LabeledVolume&) = default;

 private:
  Grid grid_;
  std::vector<std::uint8_t> labels_;
};

/// One boolean per voxel on the grid of the volume it was derived from.
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Grid grid) : grid_(grid), bits_(grid.size(), 0) { validate_grid(grid_); }
  BinaryMask(Grid grid, std::vector<std::uint8_t> bits);

  const Grid& grid() const { return grid_; }
  const Dims& dims() const { return grid_.dims; }
  const Spacing& spacing() const { return grid_.spacing; }
  std::size_t size() const { return bits_.size(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  bool at(int x, int y, int z) const { return bits_[grid_.index(x, y, z)] != 0; }
  /// False outside the grid.
  bool test(int x, int y, int z) const { return grid_.contains(x, y, z) && at(x, y, z); }
  void set(int x, int y, int z, bool v = true) { bits_[grid_.index(x, y, z)] = v ? 1 : 0; }
  void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }

  /// Same grid as `spacing` replaced; used for scaling experiments.
  BinaryMask with_spacing(const Spacing& spacing) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Grid grid_;
  std::vector<std::uint8_t> bits_;
};

/// ED/ES pair for one subject.
struct SubjectStudy {
  std::string subject_id;
  LabeledVolume ed;
  LabeledVolume es;
  std::optional<int> class_label;
};

/// Throws DataError if the two phases disagree on spacing.
void validate_study(const SubjectStudy& study);

/// Bits set exactly where the label equals `structure` (1, 2 or 3).
BinaryMask extract_mask(const LabeledVolume& volume, Label structure);
BinaryMask extract_mask(const LabeledVolume& volume, int structure);

/// Union of all non-background labels.
BinaryMask foreground_mask(const LabeledVolume& volume);

double physical_volume_mm3(const BinaryMask& mask);

// CQV1 on-disk format: `<stem>.json` header plus `<stem>.raw` payload of
// nx*ny*nz uint8 label codes, x-fastest.

std::filesystem::path raw_path_for(const std::filesystem::path& header_path);

LabeledVolume load_volume(const std::filesystem::path& header_path);
void save_volume(const LabeledVolume& volume, const std::filesystem::path& header_path);

/// One row of the study manifest CSV.
struct StudyEntry {
  std::string subject_id;
  std::filesystem::path ed_path;
  std::filesystem::path es_path;
  std::optional<int> class_label;
};

/// Relative volume paths are resolved against the manifest's directory.
std::vector<StudyEntry> read_study_manifest(const std::filesystem::path& path);
void write_study_manifest(const std::vector<StudyEntry>& entries,
                          const std::filesystem::path& path);

SubjectStudy load_study(const StudyEntry& entry);

}  // namespace cmr
