#ifndef KLREF_ESTIMATOR_HPP
#define KLREF_ESTIMATOR_HPP

#include <vector>

#include "klref/multigrid.hpp"

namespace klref {

enum class EstimatorKind { Unscaled, Scaled };

// Output of the coarse-solution error estimate at offset j: the fine solution
// is compared against the stored prolongated solutions of levels L-j and
// L-j-1.
struct EstimateReport {
  int offset = 1;      // j
  int base_level = 0;  // L - j
  EstimatorKind kind = EstimatorKind::Unscaled;
  double norm_coarser = 0.0;  // surrogate error norm at level L-j-1
  double norm_base = 0.0;     // surrogate error norm at level L-j
  double conv_factor = 0.0;   // estimated grid convergence factor
  double eta = 0.0;           // global estimate of the fine-grid error
  std::vector<double> eta_local;  // per macro
};

EstimateReport error_estimate(const FmgState& state, int offset, EstimatorKind kind);

// Equivalence constants: lower * ||e_L|| <= eta_j <= upper * ||e_L||.
struct EquivalenceConstants {
  double lower = 0.0;  // C1
  double upper = 0.0;  // C2
};

EquivalenceConstants effectivity_constants(double theta, double eps, int offset);

// Upper bounds on the spread max_T gamma_T / min_T gamma_T of the local
// effectivity indices, for the scaled and unscaled indicator variants.
double local_spread_bound_scaled(double theta_max, double eps, int offset);
double local_spread_bound_unscaled(double theta_min, double theta_max, int offset);

struct BoundsConstants {
  double theta = 0.25;
  double eps = 0.0;
  int offset = 1;
  int order = 2;  // q; theta defaults to 2^-q
  double theta_eps = 0.25;
  EquivalenceConstants equivalence;
  double theta_min = 0.25;
  double theta_max = 0.25;
  double spread_scaled = 0.0;
  double spread_unscaled = 0.0;
};

BoundsConstants make_bounds(double theta, double eps, int offset);
BoundsConstants make_bounds_from_order(int order, double eps, int offset);

struct EffectivityReport {
  double gamma = 0.0;  // eta / ||e_L||
  bool gamma_valid = false;
  std::vector<double> gamma_local;  // NaN where the macro is excluded
  double spread = 0.0;              // max gamma_T / min gamma_T
  bool spread_valid = false;
};

// Validation-mode ratios of the estimate against the exact error. Macros whose
// exact local error is below 1e-14 of the global error are excluded from the
// spread.
EffectivityReport effectivity_index(const EstimateReport& report, const ErrorNorms& exact);

}  // namespace klref

#endif
