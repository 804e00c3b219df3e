#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cmr/features.hpp"
#include "cmr/io.hpp"
#include "cmr/selection.hpp"
#include "cmr/volume.hpp"

namespace cmr {

/// One row per study, in input order, columns as listed by the manifest.
FeatureMatrix extract_feature_matrix(const std::vector<SubjectStudy>& studies,
                                     const FeatureManifest& manifest);

/// subject_id followed by one column per feature.
std::string feature_table_csv(const FeatureMatrix& data);

/// Header must list exactly the manifest's feature names, in order; groups
/// are taken from the manifest.
FeatureMatrix parse_feature_table(const io::CsvTable& table, const FeatureManifest& manifest);
FeatureMatrix read_feature_table(const std::filesystem::path& path, const FeatureManifest& manifest);

/// Class label of every row, looked up by subject id. Throws DataError if a
/// subject is missing or unlabeled, or a label is outside [0, n_classes).
std::vector<int> labels_by_subject(const std::vector<std::string>& subject_ids,
                                   const std::vector<StudyEntry>& entries, int n_classes);

std::vector<int> study_labels(const std::vector<SubjectStudy>& studies, int n_classes);

}  // namespace cmr
