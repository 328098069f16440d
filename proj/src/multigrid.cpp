#include "klref/multigrid.hpp"

#include <algorithm>
#include <cmath>

namespace klref {
namespace {

std::int64_t level_nodes(const GridHierarchy& h, int l) {
  return static_cast<std::int64_t>(h.num_macros()) * lattice_size(h.level(l).n);
}

double round_two_digits(double x) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  const double exp = std::floor(std::log10(std::abs(x)));
  const double scale = std::pow(10.0, exp - 1.0);
  return std::round(x / scale) * scale;
}

}  // namespace

GridFunction prolongate(const GridFunction& coarse) {
  const HierarchyPtr& h = coarse.hierarchy();
  const int lc = coarse.level();
  if (lc + 1 > h->max_level()) throw StructuralError("prolongation beyond the finest level");
  GridFunction fine = h->create_function(lc + 1);
  const int nc = h->level(lc).n;
  const int nf = 2 * nc;
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    const auto& c = coarse.macro(slot);
    auto& f = fine.macro(slot);
    for (int j = 0; j <= nf; ++j) {
      const int row = lattice_index(nf, 0, j);
      for (int i = 0; i <= nf - j; ++i) {
        double v;
        if ((i & 1) == 0 && (j & 1) == 0) {
          v = c[static_cast<std::size_t>(lattice_index(nc, i / 2, j / 2))];
        } else if ((j & 1) == 0) {
          v = 0.5 * (c[static_cast<std::size_t>(lattice_index(nc, (i - 1) / 2, j / 2))] +
                     c[static_cast<std::size_t>(lattice_index(nc, (i + 1) / 2, j / 2))]);
        } else if ((i & 1) == 0) {
          v = 0.5 * (c[static_cast<std::size_t>(lattice_index(nc, i / 2, (j - 1) / 2))] +
                     c[static_cast<std::size_t>(lattice_index(nc, i / 2, (j + 1) / 2))]);
        } else {
          v = 0.5 * (c[static_cast<std::size_t>(lattice_index(nc, (i + 1) / 2, (j - 1) / 2))] +
                     c[static_cast<std::size_t>(lattice_index(nc, (i - 1) / 2, (j + 1) / 2))]);
        }
        f[static_cast<std::size_t>(row + i)] = v;
      }
    }
  }
  return fine;
}

GridFunction restrict_transpose(const GridFunction& fine) {
  const HierarchyPtr& h = fine.hierarchy();
  const int lf = fine.level();
  if (lf < 1) throw StructuralError("restriction below level 0");
  const int lc = lf - 1;
  const int nc = h->level(lc).n;
  const int nf = h->level(lf).n;

  // Shared fine nodes must contribute exactly once: zero the non-owner copies.
  GridFunction masked = fine;
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    auto& m = masked.macro(slot);
    for (int i = 0; i <= nf; ++i)
      if (!h->owns_boundary_node(slot, lf, i, 0))
        m[static_cast<std::size_t>(lattice_index(nf, i, 0))] = 0.0;
    for (int j = 1; j <= nf; ++j)
      if (!h->owns_boundary_node(slot, lf, 0, j))
        m[static_cast<std::size_t>(lattice_index(nf, 0, j))] = 0.0;
    for (int j = 1; j <= nf - 1; ++j)
      if (!h->owns_boundary_node(slot, lf, nf - j, j))
        m[static_cast<std::size_t>(lattice_index(nf, nf - j, j))] = 0.0;
  }

  GridFunction coarse = h->create_function(lc);
  for (int slot = 0; slot < h->num_macros(); ++slot) {
    const auto& f = masked.macro(slot);
    auto& c = coarse.macro(slot);
    for (int j = 0; j <= nf; ++j) {
      const int row = lattice_index(nf, 0, j);
      for (int i = 0; i <= nf - j; ++i) {
        const double v = f[static_cast<std::size_t>(row + i)];
        if (v == 0.0) continue;
        if ((i & 1) == 0 && (j & 1) == 0) {
          c[static_cast<std::size_t>(lattice_index(nc, i / 2, j / 2))] += v;
        } else if ((j & 1) == 0) {
          c[static_cast<std::size_t>(lattice_index(nc, (i - 1) / 2, j / 2))] += 0.5 * v;
          c[static_cast<std::size_t>(lattice_index(nc, (i + 1) / 2, j / 2))] += 0.5 * v;
        } else if ((i & 1) == 0) {
          c[static_cast<std::size_t>(lattice_index(nc, i / 2, (j - 1) / 2))] += 0.5 * v;
          c[static_cast<std::size_t>(lattice_index(nc, i / 2, (j + 1) / 2))] += 0.5 * v;
        } else {
          c[static_cast<std::size_t>(lattice_index(nc, (i + 1) / 2, (j - 1) / 2))] += 0.5 * v;
          c[static_cast<std::size_t>(lattice_index(nc, (i - 1) / 2, (j + 1) / 2))] += 0.5 * v;
        }
      }
    }
  }
  interface_sync(coarse, SyncMode::Additive);
  return coarse;
}

GridFunction prolongate_to(const GridFunction& coarse, int target_level) {
  GridFunction out = coarse;
  while (out.level() < target_level) out = prolongate(out);
  if (out.level() != target_level) throw StructuralError("prolongation target below source level");
  return out;
}

MultigridSolver::MultigridSolver(HierarchyPtr h, const ProblemSpec& p, SolverConfig cfg)
    : h_(std::move(h)), p_(&p), cfg_(cfg) {
  for (int l = 0; l <= h_->max_level(); ++l) {
    A_.emplace_back(h_, OperatorKind::Stiffness, l);
    M_.emplace_back(h_, OperatorKind::Mass, l);
  }
}

GridFunction MultigridSolver::level_rhs(int l) const {
  GridFunction b = assemble_rhs(*p_, h_, l);
  set_domain_boundary_values(b, p_->boundary);
  return b;
}

void MultigridSolver::gauss_seidel(int l, GridFunction& u, const GridFunction& b, int sweeps) {
  const OperatorP1& A = A_[static_cast<std::size_t>(l)];
  const int n = h_->level(l).n;
  const auto& groups = h_->level(l).groups;

  auto relax_boundary_node = [&](int slot, int i, int j) {
    const int idx = lattice_index(n, i, j);
    const int gid = h_->boundary_group(slot, l, i, j);
    const auto& members = groups[static_cast<std::size_t>(gid)].members;
    double value;
    if (h_->on_domain_boundary(slot, l, i, j)) {
      value = b.macro(slot)[static_cast<std::size_t>(idx)];
    } else {
      double diag = 0.0, off = 0.0;
      for (const auto& m : members) {
        double d, o;
        A.partial_row(m.slot, m.i, m.j, u.macro(m.slot), d, o);
        diag += d;
        off += o;
      }
      value = (b.macro(slot)[static_cast<std::size_t>(idx)] - off) / diag;
    }
    for (const auto& m : members) u.macro(m.slot)[static_cast<std::size_t>(m.idx)] = value;
  };

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int slot = 0; slot < h_->num_macros(); ++slot) {
      double* uu = u.macro(slot).data();
      const double* bb = b.macro(slot).data();
      const auto& s = A.stencil(slot);
      const double inv_c = 1.0 / s[0];
      for (int j = 0; j <= n; ++j) {
        const int row = lattice_index(n, 0, j);
        const int imax = n - j;
        if (j == 0 || j == n) {
          for (int i = 0; i <= imax; ++i) relax_boundary_node(slot, i, j);
          continue;
        }
        relax_boundary_node(slot, 0, j);
        const int dn = n + 1 - j;   // (i, j+1)
        const int dnw = n - j;      // (i-1, j+1)
        const int ds = n + 2 - j;   // offset down to (i, j-1)
        const int dse = n + 1 - j;  // offset down to (i+1, j-1)
        for (int i = 1; i < imax; ++i) {
          const int k = row + i;
          const double acc = bb[k] - (s[1] * uu[k + 1] + s[2] * uu[k - 1] + s[3] * uu[k + dn] +
                                      s[4] * uu[k - ds] + s[5] * uu[k + dnw] + s[6] * uu[k - dse]);
          uu[k] = acc * inv_c;
        }
        if (imax >= 1) relax_boundary_node(slot, imax, j);
      }
    }
    tel_.smooth_node_visits += level_nodes(*h_, l);
  }
}

void MultigridSolver::residual(int l, const GridFunction& u, const GridFunction& b,
                               GridFunction& r) const {
  A_[static_cast<std::size_t>(l)].apply(u, r);
  r.scale(-1.0);
  r.add_scaled(b, 1.0);
  zero_domain_boundary(r);
  const_cast<SolverTelemetry&>(tel_).operator_node_visits += level_nodes(*h_, l);
}

double MultigridSolver::residual_norm(int l, const GridFunction& u, const GridFunction& b) const {
  GridFunction r = h_->create_function(l);
  residual(l, u, b, r);
  return std::sqrt(std::max(0.0, dot_unique(r, r)));
}

void MultigridSolver::cg_level0(GridFunction& u, const GridFunction& b) {
  const OperatorP1& A = A_.front();
  GridFunction r = h_->create_function(0);
  residual(0, u, b, r);
  GridFunction p = r;
  GridFunction ap = h_->create_function(0);
  double rr = dot_unique(r, r);
  double bnorm = 0.0;
  {
    GridFunction binterior = b;
    zero_domain_boundary(binterior);
    bnorm = std::sqrt(std::max(0.0, dot_unique(binterior, binterior)));
  }
  const double tol = std::max(cfg_.coarse_rel_tol * bnorm, cfg_.coarse_abs_floor);
  int it = 0;
  while (std::sqrt(rr) > tol) {
    if (++it > cfg_.coarse_max_iter)
      throw SolverError("coarse-grid CG did not converge", std::sqrt(rr));
    A.apply(p, ap);
    tel_.operator_node_visits += level_nodes(*h_, 0);
    zero_domain_boundary(ap);
    const double pap = dot_unique(p, ap);
    if (pap <= 0.0) throw SolverError("coarse-grid CG lost positive definiteness", std::sqrt(rr));
    const double alpha = rr / pap;
    u.add_scaled(p, alpha);
    r.add_scaled(ap, -alpha);
    const double rr_new = dot_unique(r, r);
    p.scale(rr_new / rr);
    p.add_scaled(r, 1.0);
    rr = rr_new;
  }
}

void MultigridSolver::v_cycle(int l, GridFunction& u, const GridFunction& b) {
  if (l == 0) {
    cg_level0(u, b);
    return;
  }
  gauss_seidel(l, u, b, cfg_.pre_smooth);
  GridFunction r = h_->create_function(l);
  residual(l, u, b, r);
  GridFunction rc = restrict_transpose(r);
  zero_domain_boundary(rc);
  GridFunction ec = h_->create_function(l - 1);
  v_cycle(l - 1, ec, rc);
  GridFunction ef = prolongate(ec);
  u.add_scaled(ef, 1.0);
  gauss_seidel(l, u, b, cfg_.post_smooth);
}

FmgState MultigridSolver::fmg() {
  const int L = h_->max_level();
  if (L < 1) throw StructuralError("full multigrid requires at least one level above the coarse grid");

  FmgState state;
  state.h = h_;
  state.config = cfg_;
  for (int l = 0; l <= L; ++l) state.b.push_back(level_rhs(l));
  state.u.reserve(static_cast<std::size_t>(L) + 1);

  GridFunction u0 = h_->create_function(0);
  set_domain_boundary_values(u0, p_->boundary);
  cg_level0(u0, state.b[0]);
  state.u.push_back(std::move(u0));

  for (int l = 0; l < L; ++l) {
    // Pure prolongation snapshot, stored before any smoothing on l+1.
    GridFunction w = prolongate(state.u[static_cast<std::size_t>(l)]);
    GridFunction next = w;
    state.w.push_back(std::move(w));
    set_domain_boundary_values(next, p_->boundary);
    for (int cycle = 0; cycle < cfg_.nu; ++cycle) {
      v_cycle(l + 1, next, state.b[static_cast<std::size_t>(l + 1)]);
      if (cfg_.record_residuals)
        tel_.rows.push_back({l + 1, cycle + 1,
                             residual_norm(l + 1, next, state.b[static_cast<std::size_t>(l + 1)]),
                             static_cast<double>(tel_.smooth_node_visits +
                                                 tel_.operator_node_visits) /
                                 static_cast<double>(level_nodes(*h_, L))});
    }
    state.u.push_back(std::move(next));
  }

  GridFunction& uL = state.u.back();
  if (cfg_.finest_policy == FinestPolicy::ValidationTwoDigits && p_->has_exact) {
    auto eval = std::make_shared<ExactErrorEvaluator>(h_, *p_, L);
    state.error_eval = eval;
    double prev = round_two_digits(eval->evaluate(uL).global);
    for (int extra = 0; extra < cfg_.max_extra_cycles; ++extra) {
      if (prev == 0.0 || prev < 1e-14) break;
      v_cycle(L, uL, state.b.back());
      ++state.extra_cycles;
      const double cur = round_two_digits(eval->evaluate(uL).global);
      if (cur == prev) break;
      prev = cur;
    }
  } else if (cfg_.finest_policy == FinestPolicy::ResidualVsEstimate) {
    // eta_1 from the stored coarse solutions; the update norm is the proxy for
    // the algebraic error.
    double eta1 = 0.0;
    if (L >= 2) {
      const OperatorP1& mL = mass(L);
      GridFunction e_fine = uL;
      e_fine.add_scaled(state.w[static_cast<std::size_t>(L - 1)], -1.0);
      const double n_fine = l2_norm(mL, e_fine);
      GridFunction e_coarse = uL;
      e_coarse.add_scaled(prolongate_to(state.w[static_cast<std::size_t>(L - 2)], L), -1.0);
      const double n_coarse = l2_norm(mL, e_coarse);
      eta1 = n_coarse > 0.0 ? (n_fine / n_coarse) * n_fine : 0.0;
    }
    const OperatorP1& mL = mass(L);
    for (int extra = 0; extra < cfg_.max_extra_cycles; ++extra) {
      GridFunction before = uL;
      v_cycle(L, uL, state.b.back());
      ++state.extra_cycles;
      GridFunction delta = uL;
      delta.add_scaled(before, -1.0);
      const double update = l2_norm(mL, delta);
      const double target = eta1 > 0.0 ? 1e-2 * eta1 : 1e-10 * std::max(1.0, l2_norm(mL, uL));
      if (update < target) break;
    }
  }
  return state;
}

GridFunction MultigridSolver::solve_direct(int l) {
  GridFunction b = level_rhs(l);
  GridFunction u = h_->create_function(l);
  set_domain_boundary_values(u, p_->boundary);
  if (l == 0) {
    cg_level0(u, b);
    return u;
  }
  // CG on an arbitrary level; only used for small systems and references.
  const OperatorP1& A = A_[static_cast<std::size_t>(l)];
  GridFunction r = h_->create_function(l);
  residual(l, u, b, r);
  GridFunction p = r;
  GridFunction ap = h_->create_function(l);
  double rr = dot_unique(r, r);
  const double tol = std::max(cfg_.coarse_rel_tol * std::sqrt(rr), cfg_.coarse_abs_floor);
  int it = 0;
  while (std::sqrt(rr) > tol && it < cfg_.coarse_max_iter) {
    ++it;
    A.apply(p, ap);
    zero_domain_boundary(ap);
    const double pap = dot_unique(p, ap);
    if (pap <= 0.0) break;
    const double alpha = rr / pap;
    u.add_scaled(p, alpha);
    r.add_scaled(ap, -alpha);
    const double rr_new = dot_unique(r, r);
    p.scale(rr_new / rr);
    p.add_scaled(r, 1.0);
    rr = rr_new;
  }
  return u;
}

}  // namespace klref
