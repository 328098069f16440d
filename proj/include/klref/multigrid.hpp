#ifndef KLREF_MULTIGRID_HPP
#define KLREF_MULTIGRID_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "klref/fem.hpp"

namespace klref {

// Policy for the additional V-cycles on the finest level after the FMG sweep.
enum class FinestPolicy {
  None,                 // plain FMG
  ValidationTwoDigits,  // iterate until the leading two digits of ||u - u_L|| settle
  ResidualVsEstimate,   // iterate until the solution update falls below 1e-2 * eta_1
};

struct SolverConfig {
  int nu = 2;  // V-cycles per FMG level
  int pre_smooth = 2;
  int post_smooth = 2;
  double coarse_rel_tol = 1e-9;
  double coarse_abs_floor = 1e-12;
  int coarse_max_iter = 100000;
  FinestPolicy finest_policy = FinestPolicy::ValidationTwoDigits;
  int max_extra_cycles = 60;
  bool record_residuals = false;
};

struct SolverTelemetry {
  struct Row {
    int level;
    int cycle;
    double residual;
    double work_units;  // cumulative node visits / fine-level dofs
  };
  std::vector<Row> rows;
  std::int64_t smooth_node_visits = 0;
  std::int64_t operator_node_visits = 0;
};

struct FmgState {
  HierarchyPtr h;
  SolverConfig config;
  std::vector<GridFunction> u;  // levels 0..L
  std::vector<GridFunction> b;  // raw loads; boundary rows hold g
  // w[l] is the pure prolongation of u[l] to level l+1, captured the moment
  // level l finished and never updated afterwards.
  std::vector<GridFunction> w;
  int extra_cycles = 0;
  std::shared_ptr<const ExactErrorEvaluator> error_eval;  // set in validation mode
};

// Linear interpolation to the next level; reproduces P1 functions exactly.
GridFunction prolongate(const GridFunction& coarse);
// Transpose of prolongate (fine level l+1 -> coarse level l).
GridFunction restrict_transpose(const GridFunction& fine);
// Composite interpolation to `target_level`.
GridFunction prolongate_to(const GridFunction& coarse, int target_level);

class MultigridSolver {
 public:
  MultigridSolver(HierarchyPtr h, const ProblemSpec& p, SolverConfig cfg);

  const OperatorP1& stiffness(int l) const { return A_[static_cast<std::size_t>(l)]; }
  const OperatorP1& mass(int l) const { return M_[static_cast<std::size_t>(l)]; }
  const HierarchyPtr& hierarchy() const { return h_; }
  const ProblemSpec& problem() const { return *p_; }
  const SolverConfig& config() const { return cfg_; }
  SolverTelemetry& telemetry() { return tel_; }

  // Raw load vector with boundary rows overwritten by g.
  GridFunction level_rhs(int l) const;

  // Forward sweeps in macro-then-lattice order; boundary rows act as identity.
  void gauss_seidel(int l, GridFunction& u, const GridFunction& b, int sweeps);
  // r = b - A u with boundary rows zeroed.
  void residual(int l, const GridFunction& u, const GridFunction& b, GridFunction& r) const;
  void cg_level0(GridFunction& u, const GridFunction& b);
  void v_cycle(int l, GridFunction& u, const GridFunction& b);

  // Full multigrid; level 0 is solved by CG, each higher level by nu V-cycles
  // on the prolongated initial guess, then the finest-level policy runs.
  FmgState fmg();

  // Single-level solve by CG (used when no hierarchy depth is available).
  GridFunction solve_direct(int l);

 private:
  double residual_norm(int l, const GridFunction& u, const GridFunction& b) const;

  HierarchyPtr h_;
  const ProblemSpec* p_;
  SolverConfig cfg_;
  std::vector<OperatorP1> A_;
  std::vector<OperatorP1> M_;
  SolverTelemetry tel_;
};

}  // namespace klref

#endif
