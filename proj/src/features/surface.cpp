// Iso-surface area of a binary mask.
//
// The field is sampled at voxel centers and each cell of 2x2x2 neighboring
// samples is triangulated at level 0.5. Because the field is binary, every
// crossing lies at an edge midpoint. The per-configuration triangulation is
// generated once from face rules rather than a hand-written table:
//
//  * each cell face with two crossing edges contributes one segment;
//  * a face with four crossings (diagonal inside corners) contributes two
//    segments cutting off each inside corner, so foreground never connects
//    across a face diagonal and adjacent cells agree on shared faces;
//  * every crossing edge ends exactly two segments, so the segments close
//    into loops, which are fan-triangulated from their first vertex.

#include <array>
#include <cmath>
#include <vector>

#include "cmr/error.hpp"
#include "cmr/features.hpp"

namespace cmr {

namespace {

// Corner c has offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
constexpr std::array<std::array<int, 2>, 12> kEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

// Face corners in cyclic order.
constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {0, 2, 6, 4},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 3, 7, 6},  // y = 1
    {0, 1, 3, 2},  // z = 0
    {4, 5, 7, 6},  // z = 1
}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kEdges[e][0] == a && kEdges[e][1] == b) || (kEdges[e][0] == b && kEdges[e][1] == a)) {
      return e;
    }
  }
  return -1;
}

using Triangle = std::array<int, 3>;
using CaseTable = std::array<std::vector<Triangle>, 256>;

std::vector<Triangle> triangulate_case(int config) {
  auto inside = [config](int corner) { return ((config >> corner) & 1) != 0; };
  // Up to two segment partners per edge.
  std::array<std::array<int, 2>, 12> partner;
  std::array<int, 12> degree{};
  for (auto& p : partner) p = {-1, -1};
  auto link = [&](int a, int b) {
    partner[a][degree[a]++] = b;
    partner[b][degree[b]++] = a;
  };

  for (const auto& face : kFaces) {
    std::array<int, 4> edge{};
    std::array<bool, 4> crossing{};
    int n_cross = 0;
    for (int i = 0; i < 4; ++i) {
      const int a = face[i], b = face[(i + 1) % 4];
      edge[i] = edge_between(a, b);
      crossing[i] = inside(a) != inside(b);
      n_cross += crossing[i];
    }
    if (n_cross == 2) {
      int first = -1;
      for (int i = 0; i < 4; ++i) {
        if (!crossing[i]) continue;
        if (first < 0) {
          first = edge[i];
        } else {
          link(first, edge[i]);
        }
      }
    } else if (n_cross == 4) {
      // Edge i runs from face[i] to face[i+1]; corner i sits between edges
      // i-1 and i.
      for (int i = 0; i < 4; ++i) {
        if (inside(face[i])) link(edge[(i + 3) % 4], edge[i]);
      }
    }
  }

  std::vector<Triangle> triangles;
  std::array<bool, 12> visited{};
  for (int start = 0; start < 12; ++start) {
    if (degree[start] == 0 || visited[start]) continue;
    std::vector<int> loop{start};
    visited[start] = true;
    int prev = start, cur = partner[start][0];
    while (cur != start) {
      loop.push_back(cur);
      visited[cur] = true;
      const int next = partner[cur][0] == prev ? partner[cur][1] : partner[cur][0];
      prev = cur;
      cur = next;
    }
    for (std::size_t k = 1; k + 1 < loop.size(); ++k) {
      triangles.push_back({loop[0], loop[k], loop[k + 1]});
    }
  }
  return triangles;
}

const CaseTable& case_table() {
  static const CaseTable table = [] {
    CaseTable t;
    for (int c = 0; c < 256; ++c) t[c] = triangulate_case(c);
    return t;
  }();
  return table;
}

struct Vec3 {
  double x, y, z;
};

Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = b - a, v = c - a;
  const double cx = u.y * v.z - u.z * v.y;
  const double cy = u.z * v.x - u.x * v.z;
  const double cz = u.x * v.y - u.y * v.x;
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

}  // namespace

double surface_area_mm2(const BinaryMask& mask) {
  if (mask.empty()) throw DataError("surface area of an empty mask");
  const Grid& g = mask.grid();
  const auto& table = case_table();

  // Edge midpoints of the unit cell, scaled by spacing.
  std::array<Vec3, 12> midpoint{};
  for (int e = 0; e < 12; ++e) {
    const int a = kEdges[e][0], b = kEdges[e][1];
    midpoint[e] = {0.5 * ((a & 1) + (b & 1)) * g.spacing[0],
                   0.5 * (((a >> 1) & 1) + ((b >> 1) & 1)) * g.spacing[1],
                   0.5 * (((a >> 2) & 1) + ((b >> 2) & 1)) * g.spacing[2]};
  }
  // Every case's area is translation invariant, so it is computed once.
  std::array<double, 256> case_area{};
  for (int c = 0; c < 256; ++c) {
    for (const auto& t : table[c]) {
      case_area[c] += triangle_area(midpoint[t[0]], midpoint[t[1]], midpoint[t[2]]);
    }
  }

  // Cells span [-1, n-1] on every axis so the surface closes at the grid border.
  double area = 0.0;
  for (int z = -1; z < g.dims[2]; ++z) {
    for (int y = -1; y < g.dims[1]; ++y) {
      for (int x = -1; x < g.dims[0]; ++x) {
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          if (mask.test(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1))) config |= 1 << c;
        }
        area += case_area[config];
      }
    }
  }
  return area;
}

}  // namespace cmr
