#include <cmath>
#include <numbers>
#include <set>

#include "cmr/error.hpp"
#include "cmr/features.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace cmr;
using cmr::testing::make_grid;
using cmr::testing::mask_from;
using cmr::testing::volume_from;
using std::numbers::pi;

namespace {

// Concentric LV disk in an MC ring with an RV block beside it, over slices 1..nz-2.
LabeledVolume ring_heart(double lv_r, double mc_r, int rv_w, Spacing s = {1, 1, 1}) {
  const Grid g = make_grid(48, 48, 6, s);
  return volume_from(g, [=](int x, int y, int z) {
    if (z == 0 || z == 5) return 0;
    const double dx = x - 28.0, dy = y - 24.0;
    const double r = std::sqrt(dx * dx + dy * dy);
    if (r <= lv_r) return 3;
    if (r <= mc_r) return 2;
    if (x < 28 - mc_r && x >= 28 - mc_r - rv_w && std::abs(dy) < 8) return 1;
    return 0;
  });
}

}  // namespace

TEST_CASE("ejection_fraction") {
  CHECK(ejection_fraction(50, 50) == 0.0);
  CHECK(ejection_fraction(100, 40) == doctest::Approx(0.6));
  CHECK(ejection_fraction(80, 0) == 1.0);
  CHECK(ejection_fraction(100, 120) == doctest::Approx(-0.2));
  CHECK_THROWS_AS(ejection_fraction(0, 10), DataError);
}

TEST_CASE("volumetric_features") {
  const Grid g = make_grid(20, 20, 1);
  SUBCASE("LV 100 voxels at ED and 40 at ES") {
    const auto ed = volume_from(g, [](int x, int y, int) {
      if (y < 5 && x < 20) return 3;   // 100 LV
      if (y >= 10 && y < 16) return 1;  // 120 RV
      if (y == 18) return 2;           // 20 MC
      return 0;
    });
    const auto es = volume_from(g, [](int x, int y, int) {
      if (y < 2) return 3;              // 40 LV
      if (y >= 10 && y < 13) return 1;  // 60 RV
      if (y == 18) return 2;
      return 0;
    });
    const auto f = volumetric_features({"s", ed, es, 0});
    CHECK(f.size() == 12);
    CHECK(f.at("LV_EDV") == 100.0);
    CHECK(f.at("LV_ESV") == 40.0);
    CHECK(f.at("LV_EF") == doctest::Approx(0.6));
    CHECK(f.at("RV_LV_ratio_ED") == doctest::Approx(1.2));
    CHECK(f.at("RV_EF") == doctest::Approx(0.5));
    CHECK(f.at("MC_LV_ratio_ES") == doctest::Approx(0.5));
  }
  SUBCASE("identical phases") {
    const auto v = ring_heart(6, 9, 4);
    const auto f = volumetric_features({"s", v, v, 0});
    CHECK(f.at("LV_EF") == 0.0);
    CHECK(f.at("RV_EF") == 0.0);
    CHECK(f.at("RV_LV_ratio_ED") == f.at("RV_LV_ratio_ES"));
    CHECK(f.at("MC_LV_ratio_ED") == f.at("MC_LV_ratio_ES"));
  }
  SUBCASE("absent LV is a named degenerate error") {
    const auto v = volume_from(g, [](int x, int, int) { return x < 3 ? 1 : 0; });
    CHECK_THROWS_WITH_AS(volumetric_features({"s", v, v, 0}), doctest::Contains("feature RV_LV_ratio_ED"),
                         DataError);
  }
  SUBCASE("counting pass agrees for anisotropic spacing") {
    const auto v = ring_heart(7, 10, 5, {1.3, 1.3, 7.0});
    const auto f = volumetric_features({"s", v, v, 0});
    std::size_t n[4] = {};
    for (auto l : v.labels()) ++n[l];
    CHECK(f.at("LV_EDV") == doctest::Approx(n[3] * 1.3 * 1.3 * 7.0));
    CHECK(f.at("RV_EDV") == doctest::Approx(n[1] * 1.3 * 1.3 * 7.0));
    CHECK(f.at("MC_ESV") == doctest::Approx(n[2] * 1.3 * 1.3 * 7.0));
  }
}

TEST_CASE("thickness_profile") {
  SUBCASE("annulus of inner radius 10 and outer radius 15") {
    const Grid g = make_grid(41, 41, 1);
    const auto v = volume_from(g, [](int x, int y, int) {
      const double r2 = (x - 20.0) * (x - 20.0) + (y - 20.0) * (y - 20.0);
      return r2 <= 100.0 ? 3 : (r2 <= 225.0 ? 2 : 0);
    });
    const auto p = thickness_profile(v, 1.0);
    REQUIRE(p.samples.size() == 360);
    double sum = 0;
    for (const auto& s : p.samples) {
      CHECK(std::abs(s.thickness_mm - 5.0) <= 1.0);
      CHECK(s.angle_deg >= 0.0);
      CHECK(s.angle_deg < 360.0);
      sum += s.thickness_mm;
    }
    CHECK(std::abs(sum / 360.0 - 5.0) <= 0.5);
  }
  SUBCASE("MC in five of ten slices") {
    const Grid g = make_grid(30, 30, 10);
    const auto v = volume_from(g, [](int x, int y, int z) {
      if (z % 2) return 0;
      const double r2 = (x - 15.0) * (x - 15.0) + (y - 15.0) * (y - 15.0);
      return r2 <= 25.0 ? 3 : (r2 <= 64.0 ? 2 : 0);
    });
    const auto p = thickness_profile(v, 10.0);
    CHECK(p.samples.size() == 5 * 36);
    std::set<int> slices;
    for (const auto& s : p.samples) slices.insert(s.slice);
    CHECK(slices == std::set<int>{0, 2, 4, 6, 8});
  }
  SUBCASE("slice without LV falls back to the MC centroid") {
    const Grid g = make_grid(30, 30, 1);
    const auto v = volume_from(g, [](int x, int y, int) {
      const double r2 = (x - 15.0) * (x - 15.0) + (y - 15.0) * (y - 15.0);
      return r2 <= 9.0 ? 2 : 0;
    });
    const auto p = thickness_profile(v, 90.0);
    REQUIRE(p.samples.size() == 4);
    // Radius-3 disk: seven or eight half-voxel steps depending on rounding direction.
    for (const auto& s : p.samples) {
      CHECK(s.thickness_mm >= 3.5);
      CHECK(s.thickness_mm <= 4.0);
    }
  }
  SUBCASE("errors") {
    const LabeledVolume empty(make_grid(5, 5, 2));
    CHECK_THROWS_AS(thickness_profile(empty), DataError);
    CHECK_THROWS_AS(thickness_profile(ring_heart(5, 8, 3), 7.0), UsageError);
  }
}

TEST_CASE("thickness_features") {
  auto profile_of = [](std::vector<double> t) {
    ThicknessProfile p;
    for (double v : t) p.samples.push_back({0, 0.0, v});
    return p;
  };
  SUBCASE("constant profile below every threshold") {
    const auto f = thickness_features(profile_of(std::vector<double>(36, 5.0)));
    REQUIRE(f.size() == 27);
    for (const char* k : {"max", "min", "mean", "median"}) CHECK(f.at(k) == 5.0);
    CHECK(f.at("std") == 0.0);
    CHECK(f.at("variance") == 0.0);
    for (int thr = 10; thr <= 30; ++thr) CHECK(f.at("count_gt_" + std::to_string(thr)) == 0.0);
  }
  SUBCASE("hand counts") {
    const auto f = thickness_features(profile_of({8, 12, 25}));
    CHECK(f.at("count_gt_10") == 2);
    CHECK(f.at("count_gt_12") == 1);
    CHECK(f.at("count_gt_24") == 1);
    CHECK(f.at("count_gt_25") == 0);
    CHECK(f.at("median") == 12);
  }
  SUBCASE("population variance") {
    const auto f = thickness_features(profile_of({4, 6}), "t_");
    CHECK(f.at("t_mean") == 5.0);
    CHECK(f.at("t_variance") == 1.0);
    CHECK(f.at("t_std") == 1.0);
    CHECK(f.at("t_median") == 5.0);
  }
  CHECK_THROWS_AS(thickness_features(ThicknessProfile{}), DataError);
}

TEST_CASE("surface_area_mm2") {
  SUBCASE("single voxel matches the reference triangulation") {
    BinaryMask m(make_grid(1, 1, 1));
    m.set(0);
    // Eight corner triangles of an octahedron: sqrt(3) for unit spacing.
    CHECK(surface_area_mm2(m) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    // Reference value from an independent marching-cubes implementation.
    CHECK(surface_area_mm2(m.with_spacing({1.5, 1.5, 8.0})) ==
          doctest::Approx(17.11906831576999).epsilon(1e-6));
  }
  SUBCASE("flat faces of a block are exact away from edges") {
    // A 10x10x10 block: area between the inner and outer box surfaces.
    const auto m = mask_from(make_grid(10, 10, 10), [](int, int, int) { return true; });
    const double a = surface_area_mm2(m);
    CHECK(a > 6 * 9 * 9);
    CHECK(a < 6 * 10 * 10);
  }
  SUBCASE("digital sphere radius 20") {
    const auto m = cmr::testing::digital_sphere(20);
    const double area = surface_area_mm2(m);
    CHECK(std::abs(area / (4 * pi * 400) - 1.0) < 0.10);
    const auto m2 = m.with_spacing({2, 2, 2});
    CHECK(surface_area_mm2(m2) == doctest::Approx(4 * area).epsilon(1e-12));
  }
  CHECK_THROWS_AS(surface_area_mm2(BinaryMask(make_grid(2, 2, 2))), DataError);
}

TEST_CASE("principal_axes") {
  SUBCASE("cube has equal eigenvalues") {
    const auto m = mask_from(make_grid(6, 6, 6), [](int, int, int) { return true; });
    const auto ax = principal_axes(m);
    CHECK(ax.lambda_major == doctest::Approx(ax.lambda_least));
    const auto f = shape_features(m);
    CHECK(f.at("elongation") == doctest::Approx(1.0));
    CHECK(f.at("flatness") == doctest::Approx(1.0));
  }
  SUBCASE("100 collinear voxels") {
    const auto m = mask_from(make_grid(100, 1, 1), [](int, int, int) { return true; });
    const auto ax = principal_axes(m);
    // Var of 0..99 = (100^2 - 1) / 12.
    CHECK(ax.lambda_major == doctest::Approx(833.25));
    CHECK(ax.lambda_minor == doctest::Approx(0.0));
    CHECK(ax.lambda_least == doctest::Approx(0.0));
    CHECK(ax.major_length() == doctest::Approx(4 * std::sqrt(833.25)));
    CHECK(ax.major_length() == doctest::Approx(115.47).epsilon(1e-4));
  }
  SUBCASE("ellipsoid 20,10,5 against continuous moments and the brute-force oracle") {
    const auto m = cmr::testing::digital_ellipsoid(20, 10, 5);
    const auto ax = principal_axes(m);
    const auto ref = oracle::covariance_eigenvalues(m);
    CHECK(ax.lambda_major == doctest::Approx(ref[0]).epsilon(1e-9));
    CHECK(ax.lambda_minor == doctest::Approx(ref[1]).epsilon(1e-9));
    CHECK(ax.lambda_least == doctest::Approx(ref[2]).epsilon(1e-9));
    CHECK(ax.major_length() == doctest::Approx(4 * 20 / std::sqrt(5.0)).epsilon(0.03));
    CHECK(ax.minor_length() == doctest::Approx(4 * 10 / std::sqrt(5.0)).epsilon(0.03));
    CHECK(ax.least_length() == doctest::Approx(4 * 5 / std::sqrt(5.0)).epsilon(0.03));
  }
  BinaryMask one(make_grid(2, 2, 2));
  one.set(0);
  CHECK_THROWS_AS(principal_axes(one), DataError);
}

TEST_CASE("max_diameters") {
  SUBCASE("single voxel") {
    BinaryMask m(make_grid(3, 3, 3));
    m.set(1, 1, 1);
    const auto d = max_diameters(m);
    CHECK(d.d3 == 0);
    CHECK(d.d_slice == 0);
    CHECK(d.d_col == 0);
    CHECK(d.d_row == 0);
  }
  SUBCASE("z-only separation") {
    BinaryMask m(make_grid(1, 1, 5, {1, 1, 2}));
    m.set(0, 0, 0);
    m.set(0, 0, 4);
    const auto d = max_diameters(m);
    CHECK(d.d3 == 8.0);
    CHECK(d.d_slice == 0.0);
  }
  SUBCASE("3-4-5 pair") {
    BinaryMask m(make_grid(4, 5, 1));
    m.set(0, 0, 0);
    m.set(3, 4, 0);
    CHECK(max_diameters(m).d3 == 5.0);
    CHECK(shape_features(m).at("max_diameter_3d") == 5.0);
  }
  SUBCASE("full cube corner to corner") {
    const auto m = mask_from(make_grid(10, 10, 10), [](int, int, int) { return true; });
    CHECK(max_diameters(m).d3 == doctest::Approx(9 * std::sqrt(3.0)));
  }
  SUBCASE("brute-force agreement on random masks") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      const auto m = cmr::testing::random_mask(rng, 8, rng.uniform(0.05, 0.9));
      const auto d = max_diameters(m);
      const auto ref = oracle::diameters(m);
      CHECK(d.d3 == ref.d3);
      CHECK(d.d_slice == ref.d_slice);
      CHECK(d.d_col == ref.d_col);
      CHECK(d.d_row == ref.d_row);
      CHECK(d.d3 >= std::max({d.d_slice, d.d_col, d.d_row}));
    }
  }
}

TEST_CASE("shape_features") {
  SUBCASE("digital sphere") {
    const auto f = shape_features(cmr::testing::digital_sphere(20));
    REQUIRE(f.size() == 15);
    CHECK(f.at("sphericity") >= 0.90);
    CHECK(f.at("sphericity") <= 1.05);
    CHECK(f.at("spherical_disproportion") >= 0.95);
    CHECK(f.at("spherical_disproportion") <= 1.10);
    CHECK(f.at("compactness2") == doctest::Approx(std::pow(f.at("sphericity"), 3)));
  }
  SUBCASE("invariants on random masks") {
    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
      const auto m = cmr::testing::random_mask(rng, 8, rng.uniform(0.2, 0.9));
      if (m.count() < 2) continue;
      const auto f = shape_features(m);
      CHECK(std::abs(f.at("sphericity") * f.at("spherical_disproportion") - 1.0) < 1e-9);
      CHECK(f.at("sphericity") > 0.0);
      CHECK(f.at("elongation") >= 0.0);
      CHECK(f.at("elongation") <= 1.0 + 1e-12);
      CHECK(f.at("flatness") <= f.at("elongation") + 1e-12);
      for (double v : f.values) CHECK(std::isfinite(v));
    }
  }
  SUBCASE("sphericity stays below 1.05 on solid convex shapes") {
    Rng rng(12);
    for (int trial = 0; trial < 12; ++trial) {
      const auto m = cmr::testing::digital_ellipsoid(rng.uniform(4, 14), rng.uniform(4, 14),
                                                     rng.uniform(4, 14));
      const Spacing s{rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(0.5, 2)};
      const double sph = shape_features(m.with_spacing(s)).at("sphericity");
      CHECK(sph > 0.0);
      CHECK(sph <= 1.05);
    }
  }
  SUBCASE("uniform scaling") {
    const auto m = cmr::testing::digital_ellipsoid(8, 5, 3);
    const auto f1 = shape_features(m);
    const auto f2 = shape_features(m.with_spacing({3, 3, 3}));
    for (const char* k : {"max_diameter_3d", "max_diameter_slice", "major_axis", "least_axis"})
      CHECK(f2.at(k) == doctest::Approx(3 * f1.at(k)));
    CHECK(f2.at("surface_area") == doctest::Approx(9 * f1.at("surface_area")));
    CHECK(f2.at("surface_to_volume") == doctest::Approx(f1.at("surface_to_volume") / 3));
    for (const char* k : {"sphericity", "compactness1", "compactness2", "spherical_disproportion",
                          "elongation", "flatness"})
      CHECK(f2.at(k) == doctest::Approx(f1.at(k)));
  }
}

TEST_CASE("feature manifest") {
  const auto m = default_manifest();
  CHECK(m.size() == 125);
  CHECK(m.count(FeatureGroup::kVolumetric) == 12);
  CHECK(m.count(FeatureGroup::kThickness) == 54);
  CHECK(m.count(FeatureGroup::kShape) == 59);
  const auto names = m.names();
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 125);
}

TEST_CASE("assemble_features") {
  const auto ed = ring_heart(8, 12, 5);
  const auto es = ring_heart(6, 11, 3);
  const SubjectStudy study{"s", ed, es, 0};
  const auto manifest = default_manifest();
  const auto f = assemble_features(study, manifest);
  REQUIRE(f.size() == 125);
  CHECK(f.names == manifest.names());
  for (double v : f.values) CHECK(std::isfinite(v));
  const auto again = assemble_features(study, manifest);
  CHECK(again.values == f.values);

  SUBCASE("manifest subset and reordering") {
    FeatureManifest sub;
    sub.entries = {manifest.entries[124], manifest.entries[0], manifest.entries[40]};
    sub.entries[1].name = "renamed";
    const auto g = assemble_features(study, sub);
    CHECK(g.values == std::vector<double>{f.values[124], f.values[0], f.values[40]});
    CHECK(g.names[1] == "renamed");
  }
  SUBCASE("empty RV at ES names an RV ES feature") {
    const auto es_no_rv = volume_from(es.grid(), [&](int x, int y, int z) {
      const int l = es.at(x, y, z);
      return l == 1 ? 0 : l;
    });
    CHECK_THROWS_WITH_AS(assemble_features({"s", ed, es_no_rv, 0}, manifest),
                         doctest::Contains("RV_ES_"), DataError);
  }
}
