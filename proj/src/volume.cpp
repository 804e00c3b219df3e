#include "cmr/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "cmr/error.hpp"
#include "cmr/io.hpp"

namespace cmr {

namespace fs = std::filesystem;
using nlohmann::json;

const char* label_name(Label label) {
  switch (label) {
    case Label::kBackground:
      return "BG";
    case Label::kRV:
      return "RV";
    case Label::kMC:
      return "MC";
    case Label::kLV:
      return "LV";
  }
  return "?";
}

void validate_grid(const Grid& grid) {
  for (int d = 0; d < 3; ++d) {
    if (grid.dims[d] <= 0) throw DataError("volume dims must be positive");
    if (!std::isfinite(grid.spacing[d]) || grid.spacing[d] <= 0.0) {
      throw DataError("volume spacing must be positive and finite");
    }
  }
}

LabeledVolume::LabeledVolume(Grid grid, std::vector<std::uint8_t> labels)
    : grid_(grid), labels_(std::move(labels)) {
  validate_grid(grid_);
  if (labels_.size() != grid_.size()) {
    throw DataError("label array has " + std::to_string(labels_.size()) + " entries, dims need " +
                    std::to_string(grid_.size()));
  }
  auto bad = std::find_if(labels_.begin(), labels_.end(),
                          [](std::uint8_t v) { return v > kMaxLabel; });
  if (bad != labels_.end()) {
    throw DataError("invalid label code " + std::to_string(*bad) + " at voxel " +
                    std::to_string(bad - labels_.begin()));
  }
}

LabeledVolume::LabeledVolume(Grid grid) : grid_(grid), labels_(grid.size(), 0) {
  validate_grid(grid_);
}

BinaryMask::BinaryMask(Grid grid, std::vector<std::uint8_t> bits)
    : grid_(grid), bits_(std::move(bits)) {
  validate_grid(grid_);
  if (bits_.size() != grid_.size()) throw DataError("mask size does not match dims");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::with_spacing(const Spacing& spacing) const {
  Grid g = grid_;
  g.spacing = spacing;
  return BinaryMask(g, bits_);
}

void validate_study(const SubjectStudy& study) {
  if (study.ed.spacing() != study.es.spacing()) {
    throw DataError("subject " + study.subject_id + ": ED and ES spacing differ");
  }
}

BinaryMask extract_mask(const LabeledVolume& volume, int structure) {
  if (structure < 1 || structure > kMaxLabel) {
    throw UsageError("mask structure must be 1 (RV), 2 (MC) or 3 (LV), got " +
                     std::to_string(structure));
  }
  std::vector<std::uint8_t> bits(volume.size());
  const auto& labels = volume.labels();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels[i] == structure ? 1 : 0;
  return BinaryMask(volume.grid(), std::move(bits));
}

BinaryMask extract_mask(const LabeledVolume& volume, Label structure) {
  return extract_mask(volume, static_cast<int>(structure));
}

BinaryMask foreground_mask(const LabeledVolume& volume) {
  std::vector<std::uint8_t> bits(volume.size());
  const auto& labels = volume.labels();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels[i] != 0 ? 1 : 0;
  return BinaryMask(volume.grid(), std::move(bits));
}

double physical_volume_mm3(const BinaryMask& mask) {
  return static_cast<double>(mask.count()) * mask.grid().voxel_volume();
}

fs::path raw_path_for(const fs::path& header_path) {
  fs::path raw = header_path;
  raw.replace_extension(".raw");
  return raw;
}

LabeledVolume load_volume(const fs::path& header_path) {
  const std::string where = header_path.string();
  json header;
  try {
    header = json::parse(io::read_text(header_path));
  } catch (const json::exception& e) {
    throw DataError(where + ": malformed header: " + e.what());
  }
  Grid grid;
  try {
    if (header.at("magic").get<std::string>() != "CQV1") {
      throw DataError(where + ": bad magic, expected CQV1");
    }
    const auto& dims = header.at("dims");
    const auto& spacing = header.at("spacing_mm");
    if (!dims.is_array() || dims.size() != 3 || !spacing.is_array() || spacing.size() != 3) {
      throw DataError(where + ": dims and spacing_mm must have 3 entries");
    }
    for (int d = 0; d < 3; ++d) {
      grid.dims[d] = dims[d].get<int>();
      grid.spacing[d] = spacing[d].get<double>();
    }
    const auto& labels = header.at("labels");
    if (labels.at("BG").get<int>() != 0 || labels.at("RV").get<int>() != 1 ||
        labels.at("MC").get<int>() != 2 || labels.at("LV").get<int>() != 3) {
      throw DataError(where + ": label map differs from BG=0, RV=1, MC=2, LV=3");
    }
  } catch (const json::exception& e) {
    throw DataError(where + ": malformed header: " + e.what());
  }
  validate_grid(grid);

  const fs::path raw = raw_path_for(header_path);
  std::string payload = io::read_text(raw);
  if (payload.size() != grid.size()) {
    throw DataError(raw.string() + ": payload has " + std::to_string(payload.size()) +
                    " bytes, dims need " + std::to_string(grid.size()));
  }
  std::vector<std::uint8_t> labels(payload.begin(), payload.end());
  try {
    return LabeledVolume(grid, std::move(labels));
  } catch (const DataError& e) {
    throw DataError(raw.string() + ": " + e.what());
  }
}

void save_volume(const LabeledVolume& volume, const fs::path& header_path) {
  json header;
  header["magic"] = "CQV1";
  header["dims"] = volume.dims();
  header["spacing_mm"] = volume.spacing();
  header["labels"] = {{"BG", 0}, {"RV", 1}, {"MC", 2}, {"LV", 3}};
  const auto& labels = volume.labels();
  io::atomic_write(raw_path_for(header_path),
                   std::string_view(reinterpret_cast<const char*>(labels.data()), labels.size()));
  io::atomic_write(header_path, header.dump(2) + "\n");
}

std::vector<StudyEntry> read_study_manifest(const fs::path& path) {
  const auto table = io::read_csv(path);
  const auto id_col = table.column("subject_id");
  const auto ed_col = table.column("ed_path");
  const auto es_col = table.column("es_path");
  const auto cls_col = table.column("class_label");
  const fs::path base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  std::vector<StudyEntry> entries;
  for (const auto& row : table.rows) {
    StudyEntry e;
    e.subject_id = row[id_col];
    e.ed_path = resolve(row[ed_col]);
    e.es_path = resolve(row[es_col]);
    if (!row[cls_col].empty()) {
      e.class_label = io::parse_int(row[cls_col], "class_label of " + e.subject_id);
      if (*e.class_label < 0) throw DataError("negative class_label for " + e.subject_id);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_study_manifest(const std::vector<StudyEntry>& entries, const fs::path& path) {
  io::CsvTable table;
  table.header = {"subject_id", "ed_path", "es_path", "class_label"};
  const fs::path base = path.parent_path();
  auto rel = [&base](const fs::path& p) {
    return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string();
  };
  for (const auto& e : entries) {
    table.rows.push_back({e.subject_id, rel(e.ed_path), rel(e.es_path),
                          e.class_label ? std::to_string(*e.class_label) : std::string()});
  }
  io::atomic_write(path, io::to_csv(table));
}

SubjectStudy load_study(const StudyEntry& entry) {
  SubjectStudy study{entry.subject_id, load_volume(entry.ed_path), load_volume(entry.es_path),
                     entry.class_label};
  validate_study(study);
  return study;
}

}  // namespace cmr
