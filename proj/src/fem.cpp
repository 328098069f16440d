#include "klref/fem.hpp"

#include <algorithm>
#include <cmath>

namespace klref {
namespace {

struct P2 {
  double x, y;
};

// 6-point, degree-4 triangle rule (barycentric orbit form, weights sum to 1).
struct QuadPoint {
  double l0, l1, l2, w;
};
constexpr double kQa = 0.445948490915965;
constexpr double kQwa = 0.223381589678011;
constexpr double kQb = 0.091576213509771;
constexpr double kQwb = 0.109951743655322;
constexpr std::array<QuadPoint, 6> kQuad6{{
    {1 - 2 * kQa, kQa, kQa, kQwa},
    {kQa, 1 - 2 * kQa, kQa, kQwa},
    {kQa, kQa, 1 - 2 * kQa, kQwa},
    {1 - 2 * kQb, kQb, kQb, kQwb},
    {kQb, 1 - 2 * kQb, kQb, kQwb},
    {kQb, kQb, 1 - 2 * kQb, kQwb},
}};

std::array<double, 9> stiffness_matrix(const P2& p0, const P2& p1, const P2& p2) {
  const double area2 = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
  const double area = 0.5 * area2;
  // grad(lambda_i) = perp(p_{i+2} - p_{i+1}) / (2 area)
  const std::array<P2, 3> g{P2{-(p2.y - p1.y) / area2, (p2.x - p1.x) / area2},
                            P2{-(p0.y - p2.y) / area2, (p0.x - p2.x) / area2},
                            P2{-(p1.y - p0.y) / area2, (p1.x - p0.x) / area2}};
  std::array<double, 9> k{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[static_cast<std::size_t>(3 * i + j)] = area * (g[i].x * g[j].x + g[i].y * g[j].y);
  return k;
}

std::array<double, 9> mass_matrix(double area) {
  const double d = area / 6.0, o = area / 12.0;
  return {d, o, o, o, d, o, o, o, d};
}

P2 node2(const GridHierarchy& h, int slot, int l, int i, int j) {
  const Point p = h.node_coordinates(slot, l, i, j);
  return {p[0], p[1]};
}

template <typename Fn>
void for_each_lattice_boundary(int n, Fn&& fn) {
  for (int i = 0; i <= n; ++i) fn(i, 0);
  for (int j = 1; j <= n; ++j) fn(0, j);
  for (int j = 1; j <= n - 1; ++j) fn(n - j, j);
}

}  // namespace

OperatorP1::OperatorP1(HierarchyPtr h, OperatorKind kind, int level)
    : h_(std::move(h)), kind_(kind), level_(level) {
  const int m = h_->num_macros();
  const int n = h_->level(level).n;
  mats_.resize(static_cast<std::size_t>(m));
  stencils_.resize(static_cast<std::size_t>(m));
  for (int slot = 0; slot < m; ++slot) {
    const double cell_area = h_->macro_area(slot) / (static_cast<double>(n) * n);
    auto& em = mats_[static_cast<std::size_t>(slot)];
    if (kind_ == OperatorKind::Stiffness) {
      em.up = stiffness_matrix(node2(*h_, slot, level, 0, 0), node2(*h_, slot, level, 1, 0),
                               node2(*h_, slot, level, 0, 1));
      em.down = n >= 2 ? stiffness_matrix(node2(*h_, slot, level, 1, 0),
                                          node2(*h_, slot, level, 0, 1),
                                          node2(*h_, slot, level, 1, 1))
                       : std::array<double, 9>{};
    } else {
      em.up = mass_matrix(cell_area);
      em.down = n >= 2 ? mass_matrix(cell_area) : std::array<double, 9>{};
    }
    const auto& ku = em.up;
    const auto& kd = em.down;
    auto& s = stencils_[static_cast<std::size_t>(slot)];
    s[0] = ku[0] + ku[4] + ku[8] + kd[0] + kd[4] + kd[8];  // center
    s[1] = ku[1] + kd[5];                                  // E
    s[2] = ku[3] + kd[7];                                  // W
    s[3] = ku[2] + kd[2];                                  // N
    s[4] = ku[6] + kd[6];                                  // S
    s[5] = ku[5] + kd[1];                                  // NW
    s[6] = ku[7] + kd[3];                                  // SE
  }
}

void OperatorP1::apply(const GridFunction& x, GridFunction& y) const {
  if (x.level() != level_ || y.level() != level_)
    throw StructuralError("operator level mismatch");
  const int n = h_->level(level_).n;
  for (int slot = 0; slot < h_->num_macros(); ++slot) {
    const auto& xm = x.macro(slot);
    auto& ym = y.macro(slot);
    std::fill(ym.begin(), ym.end(), 0.0);
    const auto& em = mats_[static_cast<std::size_t>(slot)];
    const double* ku = em.up.data();
    const double* kd = em.down.data();
    for (int j = 0; j < n; ++j) {
      const int r0 = lattice_index(n, 0, j);
      const int r1 = lattice_index(n, 0, j + 1);
      for (int i = 0; i < n - j; ++i) {
        const int a = r0 + i, b = r0 + i + 1, c = r1 + i;
        const double xa = xm[a], xb = xm[b], xc = xm[c];
        ym[a] += ku[0] * xa + ku[1] * xb + ku[2] * xc;
        ym[b] += ku[3] * xa + ku[4] * xb + ku[5] * xc;
        ym[c] += ku[6] * xa + ku[7] * xb + ku[8] * xc;
      }
      for (int i = 0; i + 1 < n - j; ++i) {
        const int a = r0 + i + 1, b = r1 + i, c = r1 + i + 1;
        const double xa = xm[a], xb = xm[b], xc = xm[c];
        ym[a] += kd[0] * xa + kd[1] * xb + kd[2] * xc;
        ym[b] += kd[3] * xa + kd[4] * xb + kd[5] * xc;
        ym[c] += kd[6] * xa + kd[7] * xb + kd[8] * xc;
      }
    }
  }
  interface_sync(y, SyncMode::Additive);
}

void OperatorP1::partial_row(int slot, int i, int j, const std::vector<double>& x, double& diag,
                             double& off) const {
  const int n = h_->level(level_).n;
  const auto& em = mats_[static_cast<std::size_t>(slot)];
  const double* ku = em.up.data();
  const double* kd = em.down.data();
  diag = 0.0;
  off = 0.0;
  auto idx = [n](int ii, int jj) { return lattice_index(n, ii, jj); };
  // up(i, j): center at position 0
  if (i + j <= n - 1) {
    diag += ku[0];
    off += ku[1] * x[static_cast<std::size_t>(idx(i + 1, j))] +
           ku[2] * x[static_cast<std::size_t>(idx(i, j + 1))];
  }
  // up(i-1, j): position 1
  if (i >= 1 && i - 1 + j <= n - 1) {
    diag += ku[4];
    off += ku[3] * x[static_cast<std::size_t>(idx(i - 1, j))] +
           ku[5] * x[static_cast<std::size_t>(idx(i - 1, j + 1))];
  }
  // up(i, j-1): position 2
  if (j >= 1 && i + j - 1 <= n - 1) {
    diag += ku[8];
    off += ku[6] * x[static_cast<std::size_t>(idx(i, j - 1))] +
           ku[7] * x[static_cast<std::size_t>(idx(i + 1, j - 1))];
  }
  // down(i-1, j): position 0
  if (i >= 1 && i + j <= n - 1) {
    diag += kd[0];
    off += kd[1] * x[static_cast<std::size_t>(idx(i - 1, j + 1))] +
           kd[2] * x[static_cast<std::size_t>(idx(i, j + 1))];
  }
  // down(i, j-1): position 1
  if (j >= 1 && i + j <= n - 1) {
    diag += kd[4];
    off += kd[3] * x[static_cast<std::size_t>(idx(i + 1, j - 1))] +
           kd[5] * x[static_cast<std::size_t>(idx(i + 1, j))];
  }
  // down(i-1, j-1): position 2
  if (i >= 1 && j >= 1 && i + j <= n) {
    diag += kd[8];
    off += kd[6] * x[static_cast<std::size_t>(idx(i, j - 1))] +
           kd[7] * x[static_cast<std::size_t>(idx(i - 1, j))];
  }
}

GridFunction assemble_rhs(const ProblemSpec& p, const HierarchyPtr& h, int level) {
  GridFunction b = h->create_function(level);
  const int n = h->level(level).n;
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    auto& bm = b.macro(slot);
    const double cell_area = h->macro_area(slot) / (static_cast<double>(n) * n);
    const double w = cell_area / 3.0;
    const auto& corners = h->macro_corners(slot);
    const double ux = (corners[1][0] - corners[0][0]) / n, uy = (corners[1][1] - corners[0][1]) / n;
    const double wx = (corners[2][0] - corners[0][0]) / n, wy = (corners[2][1] - corners[0][1]) / n;
    auto px = [&](double i, double j) { return corners[0][0] + i * ux + j * wx; };
    auto py = [&](double i, double j) { return corners[0][1] + i * uy + j * wy; };
    auto add_cell = [&](int a, int b_, int c, double i0, double j0, double i1, double j1,
                        double i2, double j2) {
      const double f01 = p.source(px(0.5 * (i0 + i1), 0.5 * (j0 + j1)),
                                  py(0.5 * (i0 + i1), 0.5 * (j0 + j1)));
      const double f02 = p.source(px(0.5 * (i0 + i2), 0.5 * (j0 + j2)),
                                  py(0.5 * (i0 + i2), 0.5 * (j0 + j2)));
      const double f12 = p.source(px(0.5 * (i1 + i2), 0.5 * (j1 + j2)),
                                  py(0.5 * (i1 + i2), 0.5 * (j1 + j2)));
      bm[static_cast<std::size_t>(a)] += w * 0.5 * (f01 + f02);
      bm[static_cast<std::size_t>(b_)] += w * 0.5 * (f01 + f12);
      bm[static_cast<std::size_t>(c)] += w * 0.5 * (f02 + f12);
    };
    for (int j = 0; j < n; ++j) {
      const int r0 = lattice_index(n, 0, j);
      const int r1 = lattice_index(n, 0, j + 1);
      for (int i = 0; i < n - j; ++i)
        add_cell(r0 + i, r0 + i + 1, r1 + i, i, j, i + 1, j, i, j + 1);
      for (int i = 0; i + 1 < n - j; ++i)
        add_cell(r0 + i + 1, r1 + i, r1 + i + 1, i + 1, j, i, j + 1, i + 1, j + 1);
    }
  }
  interface_sync(b, SyncMode::Additive);
  return b;
}

void set_domain_boundary_values(GridFunction& f,
                                const std::function<double(double, double)>& fn) {
  const GridHierarchy& h = *f.hierarchy();
  const int l = f.level();
  const int n = h.level(l).n;
  for (int slot = 0; slot < h.num_macros(); ++slot) {
    auto& fm = f.macro(slot);
    for_each_lattice_boundary(n, [&](int i, int j) {
      if (!h.on_domain_boundary(slot, l, i, j)) return;
      const Point x = h.node_coordinates(slot, l, i, j);
      fm[static_cast<std::size_t>(lattice_index(n, i, j))] = fn(x[0], x[1]);
    });
  }
  // Coordinates are computed through each macro's own affine map; make the
  // copies bit-identical.
  interface_sync(f, SyncMode::ReplaceFromOwner);
}

void zero_domain_boundary(GridFunction& f) {
  const GridHierarchy& h = *f.hierarchy();
  const int l = f.level();
  const int n = h.level(l).n;
  for (int slot = 0; slot < h.num_macros(); ++slot) {
    auto& fm = f.macro(slot);
    for_each_lattice_boundary(n, [&](int i, int j) {
      if (h.on_domain_boundary(slot, l, i, j))
        fm[static_cast<std::size_t>(lattice_index(n, i, j))] = 0.0;
    });
  }
}

GridFunction DirichletSystem::modified_rhs() const {
  const HierarchyPtr& h = stiffness->hierarchy();
  const int l = stiffness->level();
  GridFunction lift = h->create_function(l);
  const int n = h->level(l).n;
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    auto& lm = lift.macro(slot);
    const auto& rm = rhs.macro(slot);
    for_each_lattice_boundary(n, [&](int i, int j) {
      if (h->on_domain_boundary(slot, l, i, j)) {
        const std::size_t k = static_cast<std::size_t>(lattice_index(n, i, j));
        lm[k] = rm[k];
      }
    });
  }
  GridFunction coupled = h->create_function(l);
  stiffness->apply(lift, coupled);
  GridFunction out = rhs;
  out.add_scaled(coupled, -1.0);
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    auto& om = out.macro(slot);
    const auto& rm = rhs.macro(slot);
    for_each_lattice_boundary(n, [&](int i, int j) {
      if (h->on_domain_boundary(slot, l, i, j)) {
        const std::size_t k = static_cast<std::size_t>(lattice_index(n, i, j));
        om[k] = rm[k];
      }
    });
  }
  return out;
}

GridFunction DirichletSystem::initial_guess() const {
  const HierarchyPtr& h = stiffness->hierarchy();
  const int l = stiffness->level();
  GridFunction x0 = h->create_function(l);
  const int n = h->level(l).n;
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    auto& xm = x0.macro(slot);
    const auto& rm = rhs.macro(slot);
    for_each_lattice_boundary(n, [&](int i, int j) {
      if (h->on_domain_boundary(slot, l, i, j)) {
        const std::size_t k = static_cast<std::size_t>(lattice_index(n, i, j));
        xm[k] = rm[k];
      }
    });
  }
  return x0;
}

void DirichletSystem::apply_modified(const GridFunction& x, GridFunction& y) const {
  GridFunction masked = x;
  zero_domain_boundary(masked);
  stiffness->apply(masked, y);
  const HierarchyPtr& h = stiffness->hierarchy();
  const int l = stiffness->level();
  const int n = h->level(l).n;
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    auto& ym = y.macro(slot);
    const auto& xm = x.macro(slot);
    for_each_lattice_boundary(n, [&](int i, int j) {
      if (h->on_domain_boundary(slot, l, i, j)) {
        const std::size_t k = static_cast<std::size_t>(lattice_index(n, i, j));
        ym[k] = xm[k];
      }
    });
  }
}

DirichletSystem apply_dirichlet(const OperatorP1& stiffness, const ProblemSpec& p) {
  DirichletSystem sys;
  sys.stiffness = &stiffness;
  sys.rhs = assemble_rhs(p, stiffness.hierarchy(), stiffness.level());
  set_domain_boundary_values(sys.rhs, p.boundary);
  return sys;
}

double l2_norm(const OperatorP1& mass, const GridFunction& f) {
  if (mass.kind() != OperatorKind::Mass) throw StructuralError("l2_norm requires a mass operator");
  GridFunction mf = mass.hierarchy()->create_function(mass.level());
  mass.apply(f, mf);
  return std::sqrt(std::max(0.0, dot_unique(f, mf)));
}

std::vector<double> local_l2_norms(const OperatorP1& mass, const GridFunction& f) {
  if (mass.kind() != OperatorKind::Mass)
    throw StructuralError("local_l2_norms requires a mass operator");
  const GridHierarchy& h = *mass.hierarchy();
  const int n = h.level(mass.level()).n;
  std::vector<double> out(static_cast<std::size_t>(h.num_macros()), 0.0);
  for (int slot = 0; slot < h.num_macros(); ++slot) {
    const auto& fm = f.macro(slot);
    const auto& em = mass.matrices(slot);
    const double* ku = em.up.data();
    const double* kd = em.down.data();
    double sum = 0.0;
    auto cell = [&](const double* k, int a, int b, int c) {
      const double xa = fm[static_cast<std::size_t>(a)];
      const double xb = fm[static_cast<std::size_t>(b)];
      const double xc = fm[static_cast<std::size_t>(c)];
      sum += xa * (k[0] * xa + k[1] * xb + k[2] * xc) +
             xb * (k[3] * xa + k[4] * xb + k[5] * xc) +
             xc * (k[6] * xa + k[7] * xb + k[8] * xc);
    };
    for (int j = 0; j < n; ++j) {
      const int r0 = lattice_index(n, 0, j);
      const int r1 = lattice_index(n, 0, j + 1);
      for (int i = 0; i < n - j; ++i) cell(ku, r0 + i, r0 + i + 1, r1 + i);
      for (int i = 0; i + 1 < n - j; ++i) cell(kd, r0 + i + 1, r1 + i, r1 + i + 1);
    }
    out[static_cast<std::size_t>(slot)] = std::sqrt(std::max(0.0, sum));
  }
  return out;
}

ExactErrorEvaluator::ExactErrorEvaluator(HierarchyPtr h, const ProblemSpec& p, int level)
    : h_(std::move(h)), p_(&p), level_(level) {
  const int n = h_->level(level).n;
  moments_ = h_->create_function(level);
  u_sq_.assign(static_cast<std::size_t>(h_->num_macros()), 0.0);
  mass_.resize(static_cast<std::size_t>(h_->num_macros()));
  for (int slot = 0; slot < h_->num_macros(); ++slot) {
    const double cell_area = h_->macro_area(slot) / (static_cast<double>(n) * n);
    mass_[static_cast<std::size_t>(slot)].up = mass_matrix(cell_area);
    mass_[static_cast<std::size_t>(slot)].down = mass_matrix(cell_area);
    auto& mm = moments_.macro(slot);
    double& usq = u_sq_[static_cast<std::size_t>(slot)];
    const auto& corners = h_->macro_corners(slot);
    const double ux = (corners[1][0] - corners[0][0]) / n, uy = (corners[1][1] - corners[0][1]) / n;
    const double wx = (corners[2][0] - corners[0][0]) / n, wy = (corners[2][1] - corners[0][1]) / n;
    auto cell = [&](int a, int b, int c, double i0, double j0, double i1, double j1, double i2,
                    double j2) {
      for (const auto& q : kQuad6) {
        const double ii = q.l0 * i0 + q.l1 * i1 + q.l2 * i2;
        const double jj = q.l0 * j0 + q.l1 * j1 + q.l2 * j2;
        const double x = corners[0][0] + ii * ux + jj * wx;
        const double y = corners[0][1] + ii * uy + jj * wy;
        const double uval = p_->exact(x, y);
        const double wa = q.w * cell_area;
        mm[static_cast<std::size_t>(a)] += wa * uval * q.l0;
        mm[static_cast<std::size_t>(b)] += wa * uval * q.l1;
        mm[static_cast<std::size_t>(c)] += wa * uval * q.l2;
        usq += wa * uval * uval;
      }
    };
    for (int j = 0; j < n; ++j) {
      const int r0 = lattice_index(n, 0, j);
      const int r1 = lattice_index(n, 0, j + 1);
      for (int i = 0; i < n - j; ++i) cell(r0 + i, r0 + i + 1, r1 + i, i, j, i + 1, j, i, j + 1);
      for (int i = 0; i + 1 < n - j; ++i)
        cell(r0 + i + 1, r1 + i, r1 + i + 1, i + 1, j, i, j + 1, i + 1, j + 1);
    }
  }
}

ErrorNorms ExactErrorEvaluator::evaluate(const GridFunction& u_h) const {
  const int n = h_->level(level_).n;
  ErrorNorms out;
  out.per_macro.assign(static_cast<std::size_t>(h_->num_macros()), 0.0);
  double total = 0.0;
  double scale = 0.0;
  for (int slot = 0; slot < h_->num_macros(); ++slot) {
    const auto& cm = u_h.macro(slot);
    const auto& mm = moments_.macro(slot);
    double cross = 0.0;
    for (std::size_t k = 0; k < cm.size(); ++k) cross += mm[k] * cm[k];
    const auto& em = mass_[static_cast<std::size_t>(slot)];
    const double* ku = em.up.data();
    double uh_sq = 0.0;
    auto cell = [&](int a, int b, int c) {
      const double xa = cm[static_cast<std::size_t>(a)];
      const double xb = cm[static_cast<std::size_t>(b)];
      const double xc = cm[static_cast<std::size_t>(c)];
      uh_sq += xa * (ku[0] * xa + ku[1] * xb + ku[2] * xc) +
               xb * (ku[3] * xa + ku[4] * xb + ku[5] * xc) +
               xc * (ku[6] * xa + ku[7] * xb + ku[8] * xc);
    };
    for (int j = 0; j < n; ++j) {
      const int r0 = lattice_index(n, 0, j);
      const int r1 = lattice_index(n, 0, j + 1);
      for (int i = 0; i < n - j; ++i) cell(r0 + i, r0 + i + 1, r1 + i);
      for (int i = 0; i + 1 < n - j; ++i) cell(r0 + i + 1, r1 + i, r1 + i + 1);
    }
    const double e2 = u_sq_[static_cast<std::size_t>(slot)] - 2.0 * cross + uh_sq;
    out.per_macro[static_cast<std::size_t>(slot)] = e2;
    total += e2;
    scale += u_sq_[static_cast<std::size_t>(slot)] + uh_sq;
  }
  // The three-term form cancels catastrophically for tiny errors.
  if (total < 1e-12 * scale) return evaluate_pointwise(u_h);
  for (double& v : out.per_macro) v = std::sqrt(std::max(0.0, v));
  out.global = std::sqrt(std::max(0.0, total));
  return out;
}

ErrorNorms ExactErrorEvaluator::evaluate_pointwise(const GridFunction& u_h) const {
  const int n = h_->level(level_).n;
  ErrorNorms out;
  out.per_macro.assign(static_cast<std::size_t>(h_->num_macros()), 0.0);
  double total = 0.0;
  for (int slot = 0; slot < h_->num_macros(); ++slot) {
    const auto& cm = u_h.macro(slot);
    const double cell_area = h_->macro_area(slot) / (static_cast<double>(n) * n);
    const auto& corners = h_->macro_corners(slot);
    const double ux = (corners[1][0] - corners[0][0]) / n, uy = (corners[1][1] - corners[0][1]) / n;
    const double wx = (corners[2][0] - corners[0][0]) / n, wy = (corners[2][1] - corners[0][1]) / n;
    double sum = 0.0;
    auto cell = [&](int a, int b, int c, double i0, double j0, double i1, double j1, double i2,
                    double j2) {
      const double ca = cm[static_cast<std::size_t>(a)];
      const double cb = cm[static_cast<std::size_t>(b)];
      const double cc = cm[static_cast<std::size_t>(c)];
      for (const auto& q : kQuad6) {
        const double ii = q.l0 * i0 + q.l1 * i1 + q.l2 * i2;
        const double jj = q.l0 * j0 + q.l1 * j1 + q.l2 * j2;
        const double x = corners[0][0] + ii * ux + jj * wx;
        const double y = corners[0][1] + ii * uy + jj * wy;
        const double diff = p_->exact(x, y) - (q.l0 * ca + q.l1 * cb + q.l2 * cc);
        sum += q.w * cell_area * diff * diff;
      }
    };
    for (int j = 0; j < n; ++j) {
      const int r0 = lattice_index(n, 0, j);
      const int r1 = lattice_index(n, 0, j + 1);
      for (int i = 0; i < n - j; ++i) cell(r0 + i, r0 + i + 1, r1 + i, i, j, i + 1, j, i, j + 1);
      for (int i = 0; i + 1 < n - j; ++i)
        cell(r0 + i + 1, r1 + i, r1 + i + 1, i + 1, j, i, j + 1, i + 1, j + 1);
    }
    out.per_macro[static_cast<std::size_t>(slot)] = std::sqrt(sum);
    total += sum;
  }
  out.global = std::sqrt(total);
  return out;
}

ErrorNorms exact_error_norm(const ProblemSpec& p, const GridFunction& u_h) {
  ExactErrorEvaluator eval(u_h.hierarchy(), p, u_h.level());
  return eval.evaluate(u_h);
}

}  // namespace klref
