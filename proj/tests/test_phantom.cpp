#include <cmath>

#include "cmr/dataset.hpp"
#include "cmr/error.hpp"
#include "cmr/features.hpp"
#include "cmr/phantom.hpp"
#include "cmr/postprocess.hpp"
#include "cmr/rng.hpp"
#include "cmr/seg_metrics.hpp"
#include "doctest.h"

using namespace cmr;

namespace {

PhantomSpec spec_for(int class_id, std::uint64_t seed) {
  PhantomSpec s;
  s.class_id = class_id;
  s.profile = default_phantom_classes()[static_cast<std::size_t>(class_id)];
  s.seed = seed;
  return s;
}

double structure_dice(const LabeledVolume& a, const LabeledVolume& b, int label) {
  return dice(extract_mask(a, label), extract_mask(b, label));
}

std::size_t foreground_components(const LabeledVolume& v) {
  return connected_components(foreground_mask(v), Connectivity::k26).count();
}

}  // namespace

TEST_CASE("default classes") {
  const auto classes = default_phantom_classes();
  REQUIRE(classes.size() == 5);
  CHECK(classes[0].name == "normal");
  CHECK(classes[2].name == "hypertrophic");
}

TEST_CASE("generated phantoms are valid and produce 125 finite features") {
  const auto manifest = default_manifest();
  for (int c = 0; c < 5; ++c) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto study = generate_phantom(spec_for(c, seed));
      CHECK_NOTHROW(validate_study(study));
      REQUIRE(study.class_label.has_value());
      CHECK(*study.class_label == c);
      for (int label = 1; label <= 3; ++label) {
        CHECK_FALSE(extract_mask(study.ed, label).empty());
        CHECK_FALSE(extract_mask(study.es, label).empty());
      }
      // One connected heart per phase.
      CHECK(foreground_components(study.ed) == 1);
      CHECK(foreground_components(study.es) == 1);
      const auto fv = assemble_features(study, manifest);
      REQUIRE(fv.size() == 125);
      for (double v : fv.values) CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("same spec and seed give the same study") {
  const auto a = generate_phantom(spec_for(3, 99));
  const auto b = generate_phantom(spec_for(3, 99));
  CHECK(a.subject_id == b.subject_id);
  CHECK(a.ed == b.ed);
  CHECK(a.es == b.es);
  const auto c = generate_phantom(spec_for(3, 100));
  CHECK_FALSE(a.ed == c.ed);
}

TEST_CASE("class geometry shows up in the features") {
  const auto cohort = generate_cohort(default_phantom_classes(), 20, 42);
  REQUIRE(cohort.size() == 100);
  const auto data = extract_feature_matrix(cohort, default_manifest());
  const auto labels = study_labels(cohort, 5);
  auto col = [&](const std::string& name) {
    for (std::size_t j = 0; j < data.feature_names.size(); ++j)
      if (data.feature_names[j] == name) return static_cast<Eigen::Index>(j);
    FAIL("missing feature " << name);
    return Eigen::Index{-1};
  };
  auto class_mean = [&](Eigen::Index j, int c) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) s += data.X(static_cast<Eigen::Index>(i), j), ++n;
    return s / n;
  };
  const auto ef = col("LV_EF"), rv_ef = col("RV_EF"), gt15 = col("MC_ED_thickness_count_gt_15");

  SUBCASE("normal LV EF in [0.5, 0.7]") {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != 0) continue;
      CHECK(data.X(static_cast<Eigen::Index>(i), ef) >= 0.5);
      CHECK(data.X(static_cast<Eigen::Index>(i), ef) <= 0.7);
    }
  }
  SUBCASE("dilated EF well below normal") {
    CHECK(class_mean(ef, 1) < class_mean(ef, 0) - 0.15);
  }
  SUBCASE("hypertrophic walls exceed 15 mm") {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == 2) CHECK(data.X(static_cast<Eigen::Index>(i), gt15) > 0);
  }
  SUBCASE("abnormal RV has the lowest RV EF") {
    for (int c = 0; c < 4; ++c) CHECK(class_mean(rv_ef, 4) < class_mean(rv_ef, c) - 0.15);
  }
  SUBCASE("infarct keeps a normal-sized LV with low EF") {
    CHECK(class_mean(ef, 3) < class_mean(ef, 0) - 0.15);
    CHECK(class_mean(col("LV_EDV"), 3) < class_mean(col("LV_EDV"), 1));
  }
}

TEST_CASE("cohort ids, order and seeds") {
  const auto classes = default_phantom_classes();
  const auto cohort = generate_cohort(classes, 2, 7);
  REQUIRE(cohort.size() == 10);
  CHECK(cohort[0].subject_id == "P000");
  CHECK(cohort[9].subject_id == "P009");
  for (std::size_t i = 0; i < cohort.size(); ++i) CHECK(*cohort[i].class_label == static_cast<int>(i / 2));
  const auto again = generate_cohort(classes, 2, 7);
  for (std::size_t i = 0; i < cohort.size(); ++i) CHECK(cohort[i].ed == again[i].ed);
}

TEST_CASE("geometry outside the grid is rejected") {
  auto spec = spec_for(1, 5);
  spec.dims = {24, 24, 10};
  CHECK_THROWS_AS(generate_phantom(spec), DataError);
}

TEST_CASE("perturbation") {
  const auto study = generate_phantom(spec_for(0, 11));
  const auto& v = study.ed;

  SUBCASE("zero parameters are the identity") {
    PerturbParams p;
    p.seed = 123;
    CHECK(perturb_segmentation(v, p) == v);
  }
  SUBCASE("deterministic given the seed") {
    PerturbParams p;
    p.boundary_noise_voxels = 1;
    p.spurious_blob_rate = 1.0;
    p.seed = 5;
    CHECK(perturb_segmentation(v, p) == perturb_segmentation(v, p));
    auto q = p;
    q.seed = 6;
    CHECK_FALSE(perturb_segmentation(v, p) == perturb_segmentation(v, q));
  }
  SUBCASE("boundary noise 1 keeps Dice >= 0.85 per structure") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      PerturbParams p;
      p.boundary_noise_voxels = 1;
      p.seed = seed;
      const auto noisy = perturb_segmentation(v, p);
      CHECK_FALSE(noisy == v);
      for (int label = 1; label <= 3; ++label) CHECK(structure_dice(noisy, v, label) >= 0.85);
    }
  }
  SUBCASE("blobs are isolated and removed by the largest-component filter") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      PerturbParams p;
      p.boundary_noise_voxels = 1;
      p.seed = seed;
      const auto noisy = perturb_segmentation(v, p);
      p.spurious_blob_rate = 1.5;
      const auto blobbed = perturb_segmentation(v, p);
      // Blobs come after the boundary pass, so the shared prefix of the
      // random stream gives the same boundary noise.
      CHECK(foreground_components(blobbed) > foreground_components(noisy));
      const auto cleaned = keep_largest_component(blobbed);
      CHECK(foreground_components(cleaned) == 1);
      for (int label = 1; label <= 3; ++label) {
        const double before = structure_dice(noisy, v, label);
        CHECK(structure_dice(blobbed, v, label) <= before);
        CHECK(structure_dice(cleaned, v, label) >= before);
      }
    }
  }
  SUBCASE("invalid parameters") {
    PerturbParams p;
    p.boundary_noise_voxels = -1;
    CHECK_THROWS_AS(perturb_segmentation(v, p), UsageError);
    p.boundary_noise_voxels = 0;
    p.flip_probability = 1.5;
    CHECK_THROWS_AS(perturb_segmentation(v, p), UsageError);
  }
}

TEST_CASE("feature table round trip") {
  const auto cohort = generate_cohort(default_phantom_classes(), 1, 3);
  const auto manifest = default_manifest();
  const auto data = extract_feature_matrix(cohort, manifest);
  const auto csv = feature_table_csv(data);
  const auto back = parse_feature_table(io::parse_csv(csv, "table"), manifest);
  CHECK(back.subject_ids == data.subject_ids);
  CHECK(back.X == data.X);
  CHECK(feature_table_csv(back) == csv);

  auto t = io::parse_csv(csv, "table");
  std::swap(t.header[1], t.header[2]);
  CHECK_THROWS_AS(parse_feature_table(t, manifest), DataError);
}

TEST_CASE("labels joined by subject id") {
  std::vector<StudyEntry> entries{{"a", "", "", 1}, {"b", "", "", std::nullopt}, {"c", "", "", 0}};
  CHECK(labels_by_subject({"c", "a"}, entries, 2) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(labels_by_subject({"b"}, entries, 2), DataError);
  CHECK_THROWS_AS(labels_by_subject({"z"}, entries, 2), DataError);
  CHECK_THROWS_AS(labels_by_subject({"a"}, entries, 1), DataError);
}
