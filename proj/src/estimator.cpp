#include "klref/estimator.hpp"

#include <cmath>
#include <limits>

namespace klref {

EstimateReport error_estimate(const FmgState& state, int offset, EstimatorKind kind) {
  const int L = state.h->max_level();
  if (offset < 1 || offset > L - 1)
    throw StructuralError("estimate offset must satisfy 1 <= j <= L-1");
  const int base = L - offset;

  EstimateReport rep;
  rep.offset = offset;
  rep.base_level = base;
  rep.kind = kind;

  const OperatorP1 mass(state.h, OperatorKind::Mass, L);

  GridFunction e_base = state.u.back();
  e_base.add_scaled(prolongate_to(state.w[static_cast<std::size_t>(base)], L), -1.0);
  GridFunction e_coarser = state.u.back();
  e_coarser.add_scaled(prolongate_to(state.w[static_cast<std::size_t>(base - 1)], L), -1.0);

  rep.norm_base = l2_norm(mass, e_base);
  rep.norm_coarser = l2_norm(mass, e_coarser);
  rep.conv_factor = rep.norm_coarser > 0.0 ? rep.norm_base / rep.norm_coarser : 0.0;
  rep.eta = std::pow(rep.conv_factor, offset) * rep.norm_base;

  const std::vector<double> local_base = local_l2_norms(mass, e_base);
  if (kind == EstimatorKind::Unscaled) {
    rep.eta_local = local_base;
  } else {
    const std::vector<double> local_coarser = local_l2_norms(mass, e_coarser);
    rep.eta_local.resize(local_base.size());
    const double floor = 1e-14 * rep.norm_coarser;
    for (std::size_t t = 0; t < local_base.size(); ++t) {
      const double conv_t =
          local_coarser[t] > floor ? local_base[t] / local_coarser[t] : rep.conv_factor;
      rep.eta_local[t] = std::pow(conv_t, offset) * local_base[t];
    }
  }
  return rep;
}

EquivalenceConstants effectivity_constants(double theta, double eps, int offset) {
  const double theta_eps = (1.0 + eps) * theta;
  if (!(theta > 0.0) || eps < 0.0 || offset < 1)
    throw DomainError("effectivity constants need theta > 0, eps >= 0, offset >= 1");
  if (theta_eps >= 1.0) throw DomainError("saturation requires (1 + eps) * theta < 1");
  const double j = static_cast<double>(offset);
  EquivalenceConstants c;
  c.lower = std::pow(1.0 + eps, -j) * std::pow(1.0 - std::pow(theta_eps, j), j + 1.0) /
            std::pow(1.0 + std::pow(theta_eps, j + 1.0), j);
  c.upper = std::pow(1.0 + eps, j) * std::pow(1.0 + std::pow(theta_eps, j), j + 1.0) /
            std::pow(1.0 - std::pow(theta_eps, j + 1.0), j);
  return c;
}

double local_spread_bound_scaled(double theta_max, double eps, int offset) {
  if (!(theta_max > 0.0) || eps < 0.0 || offset < 1 || (1.0 + eps) * theta_max >= 1.0)
    throw DomainError("spread bound requires (1 + eps) * theta_max < 1");
  const double j = static_cast<double>(offset);
  const double tj = std::pow(theta_max, j);
  const double tj1 = std::pow(theta_max, j + 1.0);
  return std::pow(1.0 + eps, 2.0 * j) * std::pow((1.0 + tj1) / (1.0 - tj1), j) *
         std::pow((1.0 + tj) / (1.0 - tj), j + 1.0);
}

double local_spread_bound_unscaled(double theta_min, double theta_max, int offset) {
  if (!(theta_min > 0.0) || theta_min > theta_max || offset < 1)
    throw DomainError("spread bound requires 0 < theta_min <= theta_max");
  if (theta_max >= 1.0) throw DomainError("spread bound requires theta_max < 1");
  const double j = static_cast<double>(offset);
  return (std::pow(theta_min, -j) + 1.0) / (std::pow(theta_max, -j) - 1.0);
}

BoundsConstants make_bounds(double theta, double eps, int offset) {
  BoundsConstants b;
  b.theta = theta;
  b.eps = eps;
  b.offset = offset;
  b.order = static_cast<int>(std::lround(-std::log2(theta)));
  b.theta_eps = (1.0 + eps) * theta;
  b.equivalence = effectivity_constants(theta, eps, offset);
  b.theta_min = theta;
  b.theta_max = theta;
  b.spread_scaled = local_spread_bound_scaled(theta, eps, offset);
  b.spread_unscaled = local_spread_bound_unscaled(theta, theta, offset);
  return b;
}

BoundsConstants make_bounds_from_order(int order, double eps, int offset) {
  BoundsConstants b = make_bounds(std::pow(2.0, -static_cast<double>(order)), eps, offset);
  b.order = order;
  return b;
}

EffectivityReport effectivity_index(const EstimateReport& report, const ErrorNorms& exact) {
  EffectivityReport out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (exact.global > 0.0) {
    out.gamma = report.eta / exact.global;
    out.gamma_valid = true;
  } else {
    out.gamma = nan;
  }
  out.gamma_local.assign(report.eta_local.size(), nan);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  bool any = false;
  const double cutoff = 1e-14 * exact.global;
  for (std::size_t t = 0; t < report.eta_local.size(); ++t) {
    if (t >= exact.per_macro.size()) break;
    if (exact.per_macro[t] <= cutoff || exact.per_macro[t] == 0.0) continue;
    const double g = report.eta_local[t] / exact.per_macro[t];
    out.gamma_local[t] = g;
    lo = std::min(lo, g);
    hi = std::max(hi, g);
    any = true;
  }
  if (any && lo > 0.0) {
    out.spread = hi / lo;
    out.spread_valid = true;
  } else {
    out.spread = nan;
  }
  return out;
}

}  // namespace klref
