#include "cmr/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "cmr/error.hpp"
#include "cmr/io.hpp"

namespace cmr {

void FeatureVector::add(std::string name, double value) {
  names.push_back(std::move(name));
  values.push_back(value);
}

double FeatureVector::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw std::out_of_range("no feature named " + name);
}

void FeatureVector::append(const FeatureVector& other) {
  names.insert(names.end(), other.names.begin(), other.names.end());
  values.insert(values.end(), other.values.begin(), other.values.end());
}

const char* group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::kVolumetric:
      return "volumetric";
    case FeatureGroup::kThickness:
      return "thickness";
    case FeatureGroup::kShape:
      return "shape";
  }
  return "?";
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::kED:
      return "ED";
    case Phase::kES:
      return "ES";
    case Phase::kBoth:
      return "ED+ES";
  }
  return "?";
}

std::vector<std::string> FeatureManifest::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.name);
  return out;
}

std::size_t FeatureManifest::count(FeatureGroup group) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.group == group;
  return n;
}

namespace {

const std::vector<std::string>& thickness_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k{"max", "min", "mean", "median", "std", "variance"};
    for (int thr = kThicknessThresholdMin; thr <= kThicknessThresholdMax; ++thr) {
      k.push_back("count_gt_" + std::to_string(thr));
    }
    return k;
  }();
  return kinds;
}

std::string structure_code(Label s) { return label_name(s); }

}  // namespace

FeatureManifest default_manifest() {
  FeatureManifest m;
  auto add = [&m](std::string name, FeatureGroup g, Label s, Phase p, std::string params) {
    m.entries.push_back({std::move(name), g, s, p, std::move(params)});
  };
  using G = FeatureGroup;
  for (Label s : {Label::kLV, Label::kRV, Label::kMC}) {
    add(structure_code(s) + "_EDV", G::kVolumetric, s, Phase::kED, "volume");
    add(structure_code(s) + "_ESV", G::kVolumetric, s, Phase::kES, "volume");
  }
  for (Label s : {Label::kRV, Label::kMC}) {
    add(structure_code(s) + "_LV_ratio_ED", G::kVolumetric, s, Phase::kED, "ratio_to_LV");
    add(structure_code(s) + "_LV_ratio_ES", G::kVolumetric, s, Phase::kES, "ratio_to_LV");
  }
  add("LV_EF", G::kVolumetric, Label::kLV, Phase::kBoth, "ejection_fraction");
  add("RV_EF", G::kVolumetric, Label::kRV, Phase::kBoth, "ejection_fraction");

  for (Phase p : {Phase::kED, Phase::kES}) {
    for (const auto& kind : thickness_kinds()) {
      add(std::string("MC_") + phase_name(p) + "_thickness_" + kind, G::kThickness, Label::kMC, p,
          kind);
    }
  }

  const std::pair<Label, Phase> shape_blocks[] = {
      {Label::kLV, Phase::kED}, {Label::kLV, Phase::kES},
      {Label::kRV, Phase::kED}, {Label::kRV, Phase::kES}};
  for (const auto& [s, p] : shape_blocks) {
    for (const auto& kind : shape_feature_kinds()) {
      // compactness2 equals sphericity cubed; the RV end-systolic block omits it.
      if (s == Label::kRV && p == Phase::kES && kind == "compactness2") continue;
      add(structure_code(s) + "_" + phase_name(p) + "_" + kind, G::kShape, s, p, kind);
    }
  }
  return m;
}

namespace {

FeatureGroup parse_group(const std::string& s) {
  if (s == "volumetric") return FeatureGroup::kVolumetric;
  if (s == "thickness") return FeatureGroup::kThickness;
  if (s == "shape") return FeatureGroup::kShape;
  throw DataError("unknown feature group '" + s + "'");
}

Label parse_structure(const std::string& s) {
  if (s == "LV") return Label::kLV;
  if (s == "RV") return Label::kRV;
  if (s == "MC") return Label::kMC;
  throw DataError("unknown structure '" + s + "'");
}

Phase parse_phase(const std::string& s) {
  if (s == "ED") return Phase::kED;
  if (s == "ES") return Phase::kES;
  if (s == "ED+ES") return Phase::kBoth;
  throw DataError("unknown phase '" + s + "'");
}

void validate_entry(const ManifestEntry& e) {
  auto fail = [&e](const std::string& why) {
    throw DataError("manifest entry '" + e.name + "': " + why);
  };
  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  switch (e.group) {
    case FeatureGroup::kVolumetric:
      if (e.params == "volume" || e.params == "ratio_to_LV") {
        if (e.phase == Phase::kBoth) fail("volume features need phase ED or ES");
      } else if (e.params == "ejection_fraction") {
        if (e.phase != Phase::kBoth) fail("ejection fraction uses phase ED+ES");
      } else {
        fail("unknown volumetric params '" + e.params + "'");
      }
      break;
    case FeatureGroup::kThickness:
      if (e.structure != Label::kMC) fail("thickness is measured on MC");
      if (e.phase == Phase::kBoth) fail("thickness needs phase ED or ES");
      if (!contains(thickness_kinds(), e.params)) fail("unknown thickness params '" + e.params + "'");
      break;
    case FeatureGroup::kShape:
      if (e.phase == Phase::kBoth) fail("shape needs phase ED or ES");
      if (!contains(shape_feature_kinds(), e.params)) fail("unknown shape params '" + e.params + "'");
      break;
  }
}

}  // namespace

FeatureManifest read_manifest(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  const auto c_name = table.column("name"), c_group = table.column("group");
  const auto c_struct = table.column("structure"), c_phase = table.column("phase");
  const auto c_params = table.column("params");
  FeatureManifest m;
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    ManifestEntry e{row[c_name], parse_group(row[c_group]), parse_structure(row[c_struct]),
                    parse_phase(row[c_phase]), row[c_params]};
    validate_entry(e);
    if (!seen.insert(e.name).second) throw DataError("duplicate feature name '" + e.name + "'");
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw DataError(path.string() + ": manifest has no features");
  return m;
}

std::string manifest_to_csv(const FeatureManifest& manifest) {
  io::CsvTable t;
  t.header = {"name", "group", "structure", "phase", "params"};
  for (const auto& e : manifest.entries) {
    t.rows.push_back({e.name, group_name(e.group), label_name(e.structure), phase_name(e.phase),
                      e.params});
  }
  return io::to_csv(t);
}

double ejection_fraction(double edv_mm3, double esv_mm3) {
  if (!(edv_mm3 > 0.0)) throw DataError("ejection fraction needs a positive end-diastolic volume");
  return (edv_mm3 - esv_mm3) / edv_mm3;
}

namespace {

const LabeledVolume& phase_volume(const SubjectStudy& s, Phase p) {
  return p == Phase::kED ? s.ed : s.es;
}

// Per-structure volumes at both phases, computed once per study.
class VolumeTable {
 public:
  explicit VolumeTable(const SubjectStudy& study) {
    for (Phase p : {Phase::kED, Phase::kES}) {
      const auto& v = phase_volume(study, p);
      std::array<std::size_t, 4> counts{};
      for (auto code : v.labels()) ++counts[code];
      for (int s = 1; s <= 3; ++s) {
        mm3_[p == Phase::kES][s] = static_cast<double>(counts[s]) * v.grid().voxel_volume();
      }
    }
  }
  double get(Label s, Phase p) const {
    return mm3_[p == Phase::kES][static_cast<int>(s)];
  }

 private:
  double mm3_[2][4] = {};
};

double volumetric_value(const ManifestEntry& e, const VolumeTable& vt) {
  if (e.params == "volume") return vt.get(e.structure, e.phase);
  if (e.params == "ratio_to_LV") {
    const double lv = vt.get(Label::kLV, e.phase);
    if (!(lv > 0.0)) {
      throw DataError("feature " + e.name + ": LV volume is zero at " + phase_name(e.phase));
    }
    return vt.get(e.structure, e.phase) / lv;
  }
  const double edv = vt.get(e.structure, Phase::kED);
  if (!(edv > 0.0)) {
    throw DataError("feature " + e.name + ": " + label_name(e.structure) +
                    " end-diastolic volume is zero");
  }
  return ejection_fraction(edv, vt.get(e.structure, Phase::kES));
}

}  // namespace

FeatureVector volumetric_features(const SubjectStudy& study) {
  validate_study(study);
  const VolumeTable vt(study);
  FeatureVector f;
  for (const auto& e : default_manifest().entries) {
    if (e.group == FeatureGroup::kVolumetric) f.add(e.name, volumetric_value(e, vt));
  }
  return f;
}

FeatureVector assemble_features(const SubjectStudy& study, const FeatureManifest& manifest) {
  validate_study(study);
  const VolumeTable vt(study);
  // Thickness and shape blocks keyed by (group, structure, phase), computed
  // on first use.
  std::map<std::tuple<FeatureGroup, Label, Phase>, FeatureVector> blocks;
  auto block = [&](const ManifestEntry& e) -> const FeatureVector& {
    const auto key = std::make_tuple(e.group, e.structure, e.phase);
    auto it = blocks.find(key);
    if (it != blocks.end()) return it->second;
    const auto& volume = phase_volume(study, e.phase);
    FeatureVector fv;
    try {
      if (e.group == FeatureGroup::kThickness) {
        fv = thickness_features(thickness_profile(volume));
      } else {
        fv = shape_features(extract_mask(volume, e.structure));
      }
    } catch (const DataError& err) {
      throw DataError("subject " + study.subject_id + ", feature " + e.name + ": " + err.what());
    }
    return blocks.emplace(key, std::move(fv)).first->second;
  };

  FeatureVector out;
  for (const auto& e : manifest.entries) {
    validate_entry(e);
    double value = 0.0;
    if (e.group == FeatureGroup::kVolumetric) {
      try {
        value = volumetric_value(e, vt);
      } catch (const DataError& err) {
        throw DataError("subject " + study.subject_id + ": " + err.what());
      }
    } else {
      value = block(e).at(e.params);
    }
    if (!std::isfinite(value)) {
      throw DataError("subject " + study.subject_id + ", feature " + e.name + ": non-finite value");
    }
    out.add(e.name, value);
  }
  return out;
}

}  // namespace cmr
