#include "cmr/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cmr/error.hpp"
#include "cmr/rng.hpp"

namespace cmr {

std::vector<PhantomClass> default_phantom_classes() {
  std::vector<PhantomClass> c(5);
  c[0] = {"normal", 22.0, 8.0, 0.60, 10.0, 0.55};
  c[1] = {"dilated", 32.0, 6.0, 0.20, 10.0, 0.50};
  c[2] = {"hypertrophic", 18.0, 17.0, 0.70, 10.0, 0.55};
  c[3] = {"infarct", 24.0, 8.0, 0.30, 10.0, 0.50, 60.0, 0.4};
  c[4] = {"abnormal_rv", 22.0, 8.0, 0.60, 22.0, 0.25};
  return c;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SliceShape {
  double cx, cy;
  double lv_radius;
  double thickness;
  double sector_center;  // radians
  double sector_half;    // radians, 0 = none
  double thinning;
  double rv_offset;
  double rv_radius;
};

// Epicardial radius in direction theta at ED.
double outer_radius(const SliceShape& s, double theta) {
  double t = s.thickness;
  if (s.sector_half > 0.0) {
    const double d = std::remainder(theta - s.sector_center, 2.0 * kPi);
    if (std::abs(d) <= s.sector_half) t *= s.thinning;
  }
  return s.lv_radius + t;
}

// ES shapes keep myocardial area along every ray: R_es^2 - r_es^2 = R^2 - r^2.
std::uint8_t label_at(const SliceShape& s, double px, double py, double lv_scale, double rv_radius) {
  const double dx = px - s.cx, dy = py - s.cy;
  const double rho = std::hypot(dx, dy);
  const double r = s.lv_radius * lv_scale;
  if (rho <= r) return static_cast<std::uint8_t>(Label::kLV);
  const double R_ed = outer_radius(s, std::atan2(dy, dx));
  const double R = std::sqrt(r * r + R_ed * R_ed - s.lv_radius * s.lv_radius);
  if (rho <= R) return static_cast<std::uint8_t>(Label::kMC);
  if (std::hypot(px - (s.cx - s.rv_offset), py - s.cy) <= rv_radius) return static_cast<std::uint8_t>(Label::kRV);
  return 0;
}

int rasterize(const SliceShape& s, const Grid& g, int z, double lv_scale, double rv_radius,
              std::vector<std::uint8_t>* labels) {
  int rv = 0;
  for (int y = 0; y < g.dims[1]; ++y)
    for (int x = 0; x < g.dims[0]; ++x) {
      const auto l = label_at(s, x * g.spacing[0], y * g.spacing[1], lv_scale, rv_radius);
      rv += l == static_cast<std::uint8_t>(Label::kRV);
      if (labels) (*labels)[g.index(x, y, z)] = l;
    }
  return rv;
}

// Smallest RV radius whose crescent keeps at least `target` voxels.
double rv_radius_for(const SliceShape& s, const Grid& g, double lv_scale, int target) {
  double lo = 0.0, hi = s.rv_radius;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rasterize(s, g, 0, lv_scale, mid, nullptr) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

void check_fits(const std::vector<std::uint8_t>& labels, const Grid& g) {
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x) {
        const bool edge = x == 0 || y == 0 || x == g.dims[0] - 1 || y == g.dims[1] - 1;
        if (edge && labels[g.index(x, y, z)] != 0) {
          throw DataError("phantom geometry exceeds the volume bounds");
        }
      }
}

}  // namespace

SubjectStudy generate_phantom(const PhantomSpec& spec) {
  const PhantomClass& p = spec.profile;
  if (!(p.lv_radius_mm > 0) || !(p.mc_thickness_mm > 0) || !(p.rv_size_mm >= 0)) {
    throw UsageError("phantom radii must be positive");
  }
  if (!(p.lv_ef > 0 && p.lv_ef < 1) || !(p.rv_ef > 0 && p.rv_ef < 1)) {
    throw UsageError("phantom ejection fractions must lie in (0, 1)");
  }
  if (!(p.sector_thinning > 0 && p.sector_thinning <= 1.5)) throw UsageError("sector thinning must lie in (0, 1.5]");
  Grid g{spec.dims, spec.spacing};
  validate_grid(g);
  if (g.dims[2] < 3) throw UsageError("phantoms need at least three slices");

  Rng rng(spec.seed);
  auto scaled = [&](double v) { return v * std::max(0.5, 1.0 + spec.jitter * rng.normal()); };
  const double lv_radius = scaled(p.lv_radius_mm);
  const double thickness = scaled(p.mc_thickness_mm);
  const double rv_size = scaled(p.rv_size_mm);
  const double lv_ef = std::clamp(p.lv_ef + spec.ef_jitter * rng.normal(), 0.05, 0.9);
  const double rv_ef = std::clamp(p.rv_ef + spec.ef_jitter * rng.normal(), 0.05, 0.9);
  const double cx = 0.5625 * g.dims[0] * g.spacing[0] + rng.uniform(-2.0, 2.0);
  const double cy = 0.5 * (g.dims[1] - 1) * g.spacing[1] + rng.uniform(-2.0, 2.0);
  const double sector_center = kPi / 2 + rng.uniform(-0.3, 0.3);

  std::vector<std::uint8_t> ed(g.size(), 0), es(g.size(), 0);
  const int z0 = 1, z1 = g.dims[2] - 2;
  const double lv_scale_es = std::sqrt(1.0 - lv_ef);
  for (int z = z0; z <= z1; ++z) {
    // Base at z0, narrowing toward the apex.
    const double u = z1 > z0 ? static_cast<double>(z - z0) / (z1 - z0) : 0.0;
    const double taper = 1.0 - 0.45 * u * u;
    SliceShape s;
    s.cx = cx;
    s.cy = cy;
    s.lv_radius = lv_radius * taper;
    s.thickness = thickness;
    s.sector_center = sector_center;
    s.sector_half = p.sector_deg * kPi / 360.0;
    s.thinning = p.sector_thinning;
    const double outer = s.lv_radius + s.thickness;
    s.rv_offset = 0.8 * outer;
    s.rv_radius = 0.5 * outer + rv_size * taper;

    const int rv_ed = rasterize(s, g, z, 1.0, s.rv_radius, &ed);
    const int target = std::max(1, static_cast<int>(std::lround((1.0 - rv_ef) * rv_ed)));
    rasterize(s, g, z, lv_scale_es, rv_radius_for(s, g, lv_scale_es, target), &es);
  }
  check_fits(ed, g);
  check_fits(es, g);

  SubjectStudy study;
  char id[32];
  std::snprintf(id, sizeof id, "%s_%016llx", p.name.c_str(), static_cast<unsigned long long>(spec.seed));
  study.subject_id = id;
  study.ed = LabeledVolume(g, std::move(ed));
  study.es = LabeledVolume(g, std::move(es));
  study.class_label = spec.class_id;
  return study;
}

std::vector<SubjectStudy> generate_cohort(const std::vector<PhantomClass>& classes, int per_class, std::uint64_t seed,
                                          const Dims& dims, const Spacing& spacing) {
  if (per_class < 1) throw UsageError("per_class must be at least 1");
  std::vector<SubjectStudy> out;
  int i = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (int j = 0; j < per_class; ++j, ++i) {
      PhantomSpec spec;
      spec.class_id = static_cast<int>(c);
      spec.profile = classes[c];
      spec.dims = dims;
      spec.spacing = spacing;
      spec.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
      auto study = generate_phantom(spec);
      char id[16];
      std::snprintf(id, sizeof id, "P%03d", i);
      study.subject_id = id;
      out.push_back(std::move(study));
    }
  }
  return out;
}

LabeledVolume perturb_segmentation(const LabeledVolume& volume, const PerturbParams& params) {
  if (params.boundary_noise_voxels < 0 || params.spurious_blob_rate < 0 || params.blob_size < 1 ||
      !(params.flip_probability >= 0 && params.flip_probability <= 1)) {
    throw UsageError("invalid perturbation parameters");
  }
  const Grid& g = volume.grid();
  std::vector<std::uint8_t> L = volume.labels();
  Rng rng(params.seed);
  const int off[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

  for (int pass = 0; pass < params.boundary_noise_voxels; ++pass) {
    const std::vector<std::uint8_t> S = L;
    for (int z = 0; z < g.dims[2]; ++z)
      for (int y = 0; y < g.dims[1]; ++y)
        for (int x = 0; x < g.dims[0]; ++x) {
          const std::uint8_t self = S[g.index(x, y, z)];
          std::uint8_t options[4];
          int n = 0;
          for (const auto& o : off) {
            const int nx = x + o[0], ny = y + o[1];
            if (!g.contains(nx, ny, z)) continue;
            const std::uint8_t other = S[g.index(nx, ny, z)];
            if (other != self && std::find(options, options + n, other) == options + n) options[n++] = other;
          }
          if (n == 0) continue;
          if (rng.uniform() < params.flip_probability) {
            L[g.index(x, y, z)] = options[rng.below(static_cast<std::uint64_t>(n))];
          }
        }
  }

  if (params.spurious_blob_rate > 0) {
    const int b = params.blob_size;
    if (b + 4 > std::min(g.dims[0], g.dims[1])) throw UsageError("blob size too large for the volume");
    // No foreground within Chebyshev distance 1 of any blob voxel.
    auto clear = [&](int x0, int y0, int z) {
      for (int dz = -1; dz <= 1; ++dz)
        for (int y = y0 - 1; y <= y0 + b; ++y)
          for (int x = x0 - 1; x <= x0 + b; ++x) {
            if (g.contains(x, y, z + dz) && L[g.index(x, y, z + dz)] != 0) return false;
          }
      return true;
    };
    for (int z = 0; z < g.dims[2]; ++z) {
      const double whole = std::floor(params.spurious_blob_rate);
      int count = static_cast<int>(whole) + (rng.uniform() < params.spurious_blob_rate - whole ? 1 : 0);
      for (int blob = 0; blob < count; ++blob) {
        const auto label = static_cast<std::uint8_t>(1 + rng.below(kMaxLabel));
        for (int attempt = 0; attempt < 200; ++attempt) {
          const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.dims[0] - b + 1)));
          const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.dims[1] - b + 1)));
          if (!clear(x0, y0, z)) continue;
          for (int y = y0; y < y0 + b; ++y)
            for (int x = x0; x < x0 + b; ++x) L[g.index(x, y, z)] = label;
          break;
        }
      }
    }
  }
  return LabeledVolume(g, std::move(L));
}

}  // namespace cmr
