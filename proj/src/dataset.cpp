#include "cmr/dataset.hpp"

#include <map>

#include "cmr/error.hpp"

namespace cmr {

FeatureMatrix extract_feature_matrix(const std::vector<SubjectStudy>& studies,
                                     const FeatureManifest& manifest) {
  if (studies.empty()) throw DataError("no studies to extract");
  FeatureMatrix out;
  out.feature_names = manifest.names();
  for (const auto& e : manifest.entries) out.groups.push_back(e.group);
  out.X.resize(static_cast<Eigen::Index>(studies.size()), static_cast<Eigen::Index>(manifest.size()));
  for (std::size_t i = 0; i < studies.size(); ++i) {
    const auto fv = assemble_features(studies[i], manifest);
    for (std::size_t j = 0; j < fv.size(); ++j) out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fv.values[j];
    out.subject_ids.push_back(studies[i].subject_id);
  }
  return out;
}

std::string feature_table_csv(const FeatureMatrix& data) {
  io::CsvTable t;
  t.header.push_back("subject_id");
  t.header.insert(t.header.end(), data.feature_names.begin(), data.feature_names.end());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    std::vector<std::string> row;
    row.push_back(data.subject_ids.empty() ? std::to_string(i) : data.subject_ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < data.cols(); ++j) row.push_back(io::format_double(data.X(i, j)));
    t.rows.push_back(std::move(row));
  }
  return io::to_csv(t);
}

FeatureMatrix parse_feature_table(const io::CsvTable& table, const FeatureManifest& manifest) {
  const auto names = manifest.names();
  if (table.header.empty() || table.header[0] != "subject_id") {
    throw DataError("feature table: first column must be subject_id");
  }
  if (table.header.size() != names.size() + 1) {
    throw DataError("feature table: " + std::to_string(table.header.size() - 1) + " feature columns, manifest lists " +
                    std::to_string(names.size()));
  }
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (table.header[j + 1] != names[j]) {
      throw DataError("feature table: column " + std::to_string(j + 1) + " is " + table.header[j + 1] +
                      ", manifest expects " + names[j]);
    }
  }
  if (table.rows.empty()) throw DataError("feature table has no rows");
  FeatureMatrix out;
  out.feature_names = names;
  for (const auto& e : manifest.entries) out.groups.push_back(e.group);
  out.X.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != table.header.size()) {
      throw DataError("feature table row " + std::to_string(i + 1) + ": wrong number of fields");
    }
    out.subject_ids.push_back(row[0]);
    for (std::size_t j = 0; j < names.size(); ++j) {
      out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          io::parse_double(row[j + 1], "subject " + row[0] + ", feature " + names[j]);
    }
  }
  validate_matrix(out);
  return out;
}

FeatureMatrix read_feature_table(const std::filesystem::path& path, const FeatureManifest& manifest) {
  return parse_feature_table(io::read_csv(path), manifest);
}

namespace {

int checked_label(const std::string& id, const std::optional<int>& label, int n_classes) {
  if (!label) throw DataError("subject " + id + " has no class label");
  if (*label < 0 || *label >= n_classes) {
    throw DataError("subject " + id + ": class label " + std::to_string(*label) + " outside 0.." +
                    std::to_string(n_classes - 1));
  }
  return *label;
}

}  // namespace

std::vector<int> labels_by_subject(const std::vector<std::string>& subject_ids,
                                   const std::vector<StudyEntry>& entries, int n_classes) {
  std::map<std::string, std::optional<int>> by_id;
  for (const auto& e : entries) by_id[e.subject_id] = e.class_label;
  std::vector<int> out;
  for (const auto& id : subject_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("subject " + id + " not in the study manifest");
    out.push_back(checked_label(id, it->second, n_classes));
  }
  return out;
}

std::vector<int> study_labels(const std::vector<SubjectStudy>& studies, int n_classes) {
  std::vector<int> out;
  for (const auto& s : studies) out.push_back(checked_label(s.subject_id, s.class_label, n_classes));
  return out;
}

}  // namespace cmr
