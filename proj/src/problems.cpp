#include "klref/problems.hpp"

#include <cmath>

namespace klref {

std::array<double, 3> waves_derivatives(double alpha, double omega, double t) {
  const double e = std::exp(alpha * (t - 1.0));
  const double s = e * omega * t;
  const double s1 = e * omega * (1.0 + alpha * t);
  const double s2 = e * omega * alpha * (2.0 + alpha * t);
  const double w = 1.0 - std::cos(s);
  const double w1 = s1 * std::sin(s);
  const double w2 = s2 * std::sin(s) + s1 * s1 * std::cos(s);
  return {w, w1, w2};
}

ProblemSpec make_waves_spec(double alpha, double omega) {
  ProblemSpec p;
  p.name = "waves2d";
  auto w = [alpha, omega](double t) {
    return 1.0 - std::cos(std::exp(alpha * (t - 1.0)) * omega * t);
  };
  p.exact = [w](double x, double y) { return w(x) * w(y); };
  p.source = [alpha, omega](double x, double y) {
    const auto dx = waves_derivatives(alpha, omega, x);
    const auto dy = waves_derivatives(alpha, omega, y);
    return -(dx[2] * dy[0] + dx[0] * dy[2]);
  };
  p.boundary = p.exact;
  p.has_exact = true;
  p.domain_volume = 1.0;
  return p;
}

ProblemSpec make_lshape_spec() {
  ProblemSpec p;
  p.name = "lshape";
  p.exact = [](double x, double y) {
    const double r = std::hypot(x, y);
    if (r == 0.0) return 0.0;
    double phi = std::atan2(y, x);
    if (phi < 0.0) phi += 2.0 * M_PI;
    return std::pow(r, 2.0 / 3.0) * std::sin(2.0 * phi / 3.0);
  };
  p.source = [](double, double) { return 0.0; };
  p.boundary = p.exact;
  p.has_exact = true;
  p.has_corner = true;
  p.corner = {0.0, 0.0, 0.0};
  p.domain_volume = 3.0;
  return p;
}

namespace {

// Unit cells split along the lower-left to upper-right diagonal.
void square_grid_mesh(double x0, double y0, double x1, double y1, int nx, int ny,
                      std::vector<Point>& verts, std::vector<std::array<Index, 4>>& elems) {
  const double hx = (x1 - x0) / nx, hy = (y1 - y0) / ny;
  const Index base = static_cast<Index>(verts.size());
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) verts.push_back({x0 + i * hx, y0 + j * hy, 0.0});
  auto at = [&](int i, int j) { return base + static_cast<Index>(j * (nx + 1) + i); };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      elems.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1), kNoIndex});
      elems.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1), kNoIndex});
    }
}

}  // namespace

MacroMesh waves_initial_mesh() {
  std::vector<Point> verts;
  std::vector<std::array<Index, 4>> elems;
  square_grid_mesh(0.0, 0.0, 1.0, 1.0, 4, 4, verts, elems);
  return MacroMesh::create(2, std::move(verts), std::move(elems));
}

MacroMesh lshape_initial_mesh() {
  // Quadrants phi in (0, pi/2), (pi/2, pi), (pi, 3 pi/2); shared vertices are
  // deduplicated afterwards.
  std::vector<Point> raw_verts;
  std::vector<std::array<Index, 4>> raw_elems;
  square_grid_mesh(0.0, 0.0, 1.0, 1.0, 2, 2, raw_verts, raw_elems);
  square_grid_mesh(-1.0, 0.0, 0.0, 1.0, 2, 2, raw_verts, raw_elems);
  square_grid_mesh(-1.0, -1.0, 0.0, 0.0, 2, 2, raw_verts, raw_elems);

  std::vector<Point> verts;
  std::vector<Index> remap(raw_verts.size());
  for (std::size_t i = 0; i < raw_verts.size(); ++i) {
    Index found = kNoIndex;
    for (std::size_t k = 0; k < verts.size(); ++k) {
      if (verts[k][0] == raw_verts[i][0] && verts[k][1] == raw_verts[i][1]) {
        found = static_cast<Index>(k);
        break;
      }
    }
    if (found == kNoIndex) {
      found = static_cast<Index>(verts.size());
      verts.push_back(raw_verts[i]);
    }
    remap[i] = found;
  }
  for (auto& e : raw_elems)
    for (int k = 0; k < 3; ++k) e[static_cast<std::size_t>(k)] = remap[static_cast<std::size_t>(e[static_cast<std::size_t>(k)])];
  return MacroMesh::create(2, std::move(verts), std::move(raw_elems));
}

MacroMesh waves3d_initial_mesh() {
  const int n = 3;
  std::vector<Point> verts;
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        verts.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n,
                         static_cast<double>(k) / n});
  auto at = [&](int i, int j, int k) {
    return static_cast<Index>((k * (n + 1) + j) * (n + 1) + i);
  };
  // Six tetrahedra per cube around the main diagonal (Kuhn subdivision).
  static const int perms[6][3][3] = {
      {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}}, {{1, 0, 0}, {1, 0, 1}, {1, 1, 1}},
      {{0, 1, 0}, {1, 1, 0}, {1, 1, 1}}, {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}},
      {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}}, {{0, 0, 1}, {0, 1, 1}, {1, 1, 1}}};
  std::vector<std::array<Index, 4>> elems;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& perm : perms)
          elems.push_back({at(i, j, k), at(i + perm[0][0], j + perm[0][1], k + perm[0][2]),
                           at(i + perm[1][0], j + perm[1][1], k + perm[1][2]),
                           at(i + perm[2][0], j + perm[2][1], k + perm[2][2])});
  return MacroMesh::create(3, std::move(verts), std::move(elems));
}

double waves3d_laplacian(double alpha, double omega, double x, double y, double z) {
  const auto dx = waves_derivatives(alpha, omega, x);
  const auto dy = waves_derivatives(alpha, omega, y);
  const auto dz = waves_derivatives(alpha, omega, z);
  return dx[2] * dy[0] * dz[0] + dx[0] * dy[2] * dz[0] + dx[0] * dy[0] * dz[2];
}

}  // namespace klref
