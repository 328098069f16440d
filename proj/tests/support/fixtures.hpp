#ifndef KLREF_TESTS_FIXTURES_HPP
#define KLREF_TESTS_FIXTURES_HPP

#include <cmath>
#include <vector>

#include "klref/macro_mesh.hpp"

namespace klref::testing {

inline MacroMesh single_triangle() {
  return MacroMesh::create(2, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}},
                           {{0, 1, 2, kNoIndex}});
}

inline MacroMesh two_triangle_square() {
  return MacroMesh::create(2, {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}},
                           {{0, 1, 2, kNoIndex}, {0, 2, 3, kNoIndex}});
}

// 5 unit quads in a row, each split into two triangles: 10 elements.
inline MacroMesh triangle_strip_10() {
  std::vector<Point> v;
  for (int i = 0; i <= 5; ++i) {
    v.push_back({double(i), 0, 0});
    v.push_back({double(i), 1, 0});
  }
  std::vector<std::array<Index, 4>> e;
  for (int i = 0; i < 5; ++i) {
    const Index bl = 2 * i, tl = 2 * i + 1, br = 2 * i + 2, tr = 2 * i + 3;
    e.push_back({bl, br, tr, kNoIndex});
    e.push_back({bl, tr, tl, kNoIndex});
  }
  return MacroMesh::create(2, v, e);
}

inline MacroMesh single_tet() {
  return MacroMesh::create(3, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                           {{0, 1, 2, 3}});
}

// Two tets sharing the face (0,1,2).
inline MacroMesh two_tets_shared_face() {
  return MacroMesh::create(3,
                           {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, -1}},
                           {{0, 1, 2, 3}, {0, 1, 2, 4}});
}

// Three tets in a chain: B shares edge (0,1) with A and edge (4,5) with C.
inline MacroMesh three_tets_edge_chain() {
  return MacroMesh::create(3,
                           {{0, 0, 0},     // 0 a
                            {1, 0, 0},     // 1 b
                            {0, 1, 0},     // 2 c
                            {0, 0, 1},     // 3 d
                            {0, -1, 0},    // 4 e
                            {0, 0, -1},    // 5 f
                            {-1, 0, 0},    // 6 g
                            {-1, -1, -1}}, // 7 h
                           {{0, 1, 2, 3}, {0, 1, 4, 5}, {4, 5, 6, 7}});
}

// Parallelogram tiled by 2*nx*ny equilateral triangles. Red children of an
// equilateral triangle are equilateral, so green closures are the only source
// of reduced angles (30 degrees, half of the red minimum).
inline MacroMesh equilateral_grid(int nx, int ny) {
  const double s3 = std::sqrt(3.0) / 2.0;
  std::vector<Point> v;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) v.push_back({i + 0.5 * j, s3 * j, 0});
  auto at = [&](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };
  std::vector<std::array<Index, 4>> e;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      e.push_back({at(i, j), at(i + 1, j), at(i, j + 1), kNoIndex});
      e.push_back({at(i + 1, j), at(i + 1, j + 1), at(i, j + 1), kNoIndex});
    }
  return MacroMesh::create(2, v, e);
}

// Independent of the midpoint genealogy: tests every active vertex against
// every other active element's edges (and faces in 3-d) geometrically.
inline std::size_t geometric_hanging_count(const MacroMesh& mesh) {
  auto norm3 = [](double x, double y, double z) { return std::sqrt(x * x + y * y + z * z); };
  double scale = 0.0;
  for (Index id : mesh.active()) scale = std::max(scale, mesh.element_h(id));
  const double tol = 1e-10 * scale;

  std::vector<Index> verts;
  for (Index id : mesh.active()) {
    const auto& el = mesh.element(id);
    for (int i = 0; i < mesh.dim() + 1; ++i) verts.push_back(el.v[i]);
  }
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());

  auto on_open_segment = [&](const Point& p, const Point& a, const Point& b) {
    const double ab[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const double l2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    const double t =
        ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2]) / l2;
    if (t < 1e-9 || t > 1 - 1e-9) return false;
    return norm3(p[0] - (a[0] + t * ab[0]), p[1] - (a[1] + t * ab[1]),
                 p[2] - (a[2] + t * ab[2])) <= tol;
  };

  std::size_t count = 0;
  for (Index vid : verts) {
    const Point p = mesh.vertex(vid).coords;
    for (Index id : mesh.active()) {
      const auto& el = mesh.element(id);
      bool own = false;
      for (int i = 0; i < mesh.dim() + 1; ++i) own = own || el.v[i] == vid;
      if (own) continue;
      bool hanging = false;
      const int ne = mesh.dim() == 2 ? 3 : 6;
      static const int tri_e[3][2] = {{0, 1}, {0, 2}, {1, 2}};
      static const int tet_e[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
      for (int e = 0; e < ne && !hanging; ++e) {
        const int* ed = mesh.dim() == 2 ? tri_e[e] : tet_e[e];
        hanging = on_open_segment(p, mesh.vertex(el.v[ed[0]]).coords,
                                  mesh.vertex(el.v[ed[1]]).coords);
      }
      if (!hanging && mesh.dim() == 3) {
        static const int tet_f[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
        for (int f = 0; f < 4 && !hanging; ++f) {
          const Point a = mesh.vertex(el.v[tet_f[f][0]]).coords;
          const Point b = mesh.vertex(el.v[tet_f[f][1]]).coords;
          const Point c = mesh.vertex(el.v[tet_f[f][2]]).coords;
          const double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
          const double w[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
          const double n[3] = {u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2],
                               u[0] * w[1] - u[1] * w[0]};
          const double nn = norm3(n[0], n[1], n[2]);
          if (nn == 0.0) continue;
          const double dist = std::abs((p[0] - a[0]) * n[0] + (p[1] - a[1]) * n[1] +
                                       (p[2] - a[2]) * n[2]) /
                              nn;
          if (dist > tol) continue;
          auto area2 = [&](const Point& x, const Point& y, const Point& z) {
            const double e1[3] = {y[0] - x[0], y[1] - x[1], y[2] - x[2]};
            const double e2[3] = {z[0] - x[0], z[1] - x[1], z[2] - x[2]};
            return norm3(e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                         e1[0] * e2[1] - e1[1] * e2[0]);
          };
          const double full = nn;
          const double s0 = area2(p, b, c), s1 = area2(a, p, c), s2 = area2(a, b, p);
          if (s0 + s1 + s2 <= full * (1 + 1e-9) && s0 > 1e-9 * full && s1 > 1e-9 * full &&
              s2 > 1e-9 * full)
            hanging = true;
        }
      }
      if (hanging) ++count;
    }
  }
  return count;
}

}  // namespace klref::testing

#endif
