#include "klref/amr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace klref {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double hbar_of(double volume, std::int64_t elements) {
  return std::sqrt(volume / static_cast<double>(elements));
}

ConvergenceRecord coarse_record(const ProblemSpec& p, const MacroMesh& mesh,
                                const AmrConfig& cfg, std::vector<double>* local_errors,
                                GridFunction* solution_out = nullptr) {
  auto h = GridHierarchy::build(mesh, 0);
  MultigridSolver solver(h, p, cfg.solver);
  GridFunction u = solver.solve_direct(0);

  ConvergenceRecord rec;
  rec.phase = "k";
  rec.elements = static_cast<std::int64_t>(mesh.num_active());
  rec.dofs = h->dof_count(0);
  rec.hbar = hbar_of(mesh.total_volume(), rec.elements);
  if (p.has_exact) {
    const ErrorNorms err = exact_error_norm(p, u);
    rec.error = err.global;
    rec.error_valid = true;
    if (local_errors) *local_errors = err.per_macro;
  }
  if (solution_out) *solution_out = std::move(u);
  return rec;
}

// Marking happens on the green-reverted element set; indicators of removed
// green children accumulate into the restored parent in the L2 sense.
MacroMesh mark_and_refine(const MacroMesh& mesh, const std::vector<double>& indicator,
                          double fraction) {
  auto [reverted, ignored] = revert_green(mesh, MarkSet{});
  (void)ignored;
  std::map<Index, double> by_id;
  for (std::size_t t = 0; t < mesh.active().size(); ++t)
    by_id[mesh.active()[t]] = indicator[t];

  std::vector<double> agg(reverted.num_active(), 0.0);
  for (std::size_t t = 0; t < reverted.active().size(); ++t) {
    const Index id = reverted.active()[t];
    const auto it = by_id.find(id);
    if (it != by_id.end()) {
      agg[t] = it->second;
      continue;
    }
    // Restored parent: gather its green children from the previous mesh.
    double sq = 0.0;
    for (Index old_id : mesh.active()) {
      const MacroElement& el = mesh.element(old_id);
      if (el.state == ElementState::GreenChild && el.parent == id)
        sq += by_id[old_id] * by_id[old_id];
    }
    agg[t] = std::sqrt(sq);
  }
  const MarkSet marks = mark_top_fraction(reverted, agg, fraction);
  return refine_rg_2d(reverted, marks);
}

void fill_rbar(std::vector<ConvergenceRecord>& records, const ConvergenceRecord& base) {
  for (auto& rec : records) {
    if (!rec.error_valid || !base.error_valid) continue;
    rec.rbar = errratio(base, rec);
    rec.rbar_valid = std::isfinite(rec.rbar);
  }
}

}  // namespace

double errratio(const ConvergenceRecord& base, const ConvergenceRecord& current) {
  if (!(base.error > 0.0)) return kNaN;
  const double h2 = current.hbar * current.hbar;
  const double H2 = base.hbar * base.hbar;
  return (H2 * current.error) / (h2 * base.error);
}

std::vector<ConvergenceRecord> run_level_sweep(const ProblemSpec& p, const MacroMesh& mesh,
                                               int levels, const AmrConfig& cfg,
                                               const ConvergenceRecord* base) {
  std::vector<ConvergenceRecord> records;
  ConvergenceRecord base_local;
  for (int l = 0; l <= levels; ++l) {
    ConvergenceRecord rec;
    rec.phase = "l";
    rec.iteration = l;
    if (l == 0) {
      AmrConfig c0 = cfg;
      rec = coarse_record(p, mesh, c0, nullptr);
      rec.phase = "l";
      rec.iteration = 0;
    } else {
      auto h = GridHierarchy::build(mesh, l);
      MultigridSolver solver(h, p, cfg.solver);
      FmgState state = solver.fmg();
      rec.elements = h->fine_element_count(l);
      rec.dofs = h->dof_count(l);
      rec.hbar = hbar_of(mesh.total_volume(), rec.elements);
      if (p.has_exact) {
        const ErrorNorms err = state.error_eval
                                   ? state.error_eval->evaluate(state.u.back())
                                   : exact_error_norm(p, state.u.back());
        rec.error = err.global;
        rec.error_valid = true;
      }
      if (l >= 2) {
        const EstimateReport er = error_estimate(state, std::min(cfg.offset, l - 1),
                                                 cfg.estimator_kind);
        rec.eta = er.eta;
        rec.eta_valid = true;
      }
    }
    if (l == 0) base_local = rec;
    records.push_back(rec);
  }
  fill_rbar(records, base ? *base : base_local);
  return records;
}

AmrResult run_uniform(const ProblemSpec& p, const MacroMesh& mesh0, const AmrConfig& cfg) {
  AmrResult result;
  result.records = run_level_sweep(p, mesh0, cfg.levels, cfg, nullptr);
  result.final_mesh = mesh0;
  return result;
}

AmrResult run_k_plus_l(const ProblemSpec& p, const MacroMesh& mesh0, const AmrConfig& cfg) {
  AmrResult result;
  MacroMesh mesh = mesh0;
  ConvergenceRecord base;
  bool have_base = false;
  // Coarse-grid solves drive the K adaptive steps; the estimator has no
  // hierarchy to work with here, so the driver is the exact local error.
  for (int k = 0; k < cfg.ksteps; ++k) {
    std::vector<double> locals;
    ConvergenceRecord rec = coarse_record(p, mesh, cfg, &locals);
    rec.iteration = k;
    if (!have_base) {
      base = rec;
      have_base = true;
    }
    result.records.push_back(rec);
    mesh = mark_and_refine(mesh, locals, cfg.mark_fraction);
  }
  auto sweep = run_level_sweep(p, mesh, cfg.levels, cfg, have_base ? &base : nullptr);
  result.records.insert(result.records.end(), sweep.begin(), sweep.end());
  fill_rbar(result.records, have_base ? base : (sweep.empty() ? base : sweep.front()));
  result.final_mesh = std::move(mesh);
  return result;
}

AmrResult run_kl(const ProblemSpec& p, const MacroMesh& mesh0, const AmrConfig& cfg) {
  if (cfg.driver == DriverSource::EstimatedIndicator && cfg.levels < 2)
    throw StructuralError("the estimated-indicator driver needs at least two levels");
  AmrResult result;
  MacroMesh mesh = mesh0;

  // Base record for rbar: the initial coarse grid.
  AmrConfig base_cfg = cfg;
  ConvergenceRecord base = coarse_record(p, mesh0, base_cfg, nullptr);
  base.iteration = -1;

  std::vector<int> js = cfg.estimate_offsets;
  if (js.empty() && cfg.levels >= 2) js.push_back(std::min(cfg.offset, cfg.levels - 1));

  for (int k = 0; k <= cfg.ksteps; ++k) {
    auto h = GridHierarchy::build(mesh, cfg.levels);
    MultigridSolver solver(h, p, cfg.solver);
    FmgState state = solver.fmg();

    ConvergenceRecord rec;
    rec.phase = "k";
    rec.iteration = k;
    rec.elements = h->fine_element_count(cfg.levels);
    rec.dofs = h->dof_count(cfg.levels);
    rec.hbar = hbar_of(mesh.total_volume(), rec.elements);

    ErrorNorms exact;
    if (p.has_exact) {
      exact = state.error_eval ? state.error_eval->evaluate(state.u.back())
                               : exact_error_norm(p, state.u.back());
      rec.error = exact.global;
      rec.error_valid = true;
    }

    EstimateReport driver_report;
    bool have_driver_report = false;
    for (int j : js) {
      if (j < 1 || j > cfg.levels - 1) continue;
      EstimateRow row;
      row.iteration = k;
      row.report = error_estimate(state, j, cfg.estimator_kind);
      if (p.has_exact) {
        row.exact = exact;
        row.effectivity = effectivity_index(row.report, exact);
      }
      if (j == std::min(cfg.offset, cfg.levels - 1)) {
        rec.eta = row.report.eta;
        rec.eta_valid = true;
        driver_report = row.report;
        have_driver_report = true;
      }
      result.estimates.push_back(std::move(row));
    }
    result.records.push_back(rec);

    if (k == cfg.ksteps) break;

    std::vector<double> indicator;
    if (cfg.driver == DriverSource::ExactLocalError) {
      if (!p.has_exact)
        throw StructuralError("exact-error driver requires a closed-form solution");
      indicator = exact.per_macro;
    } else {
      if (!have_driver_report)
        driver_report = error_estimate(state, std::min(cfg.offset, cfg.levels - 1),
                                       cfg.estimator_kind);
      indicator = driver_report.eta_local;
    }
    mesh = mark_and_refine(mesh, indicator, cfg.mark_fraction);
  }
  fill_rbar(result.records, base);
  result.final_mesh = std::move(mesh);
  return result;
}

namespace {

GradingReport grading_common(const MacroMesh& mesh, const Point& corner, double level_shift) {
  GradingReport report;
  for (Index id : mesh.active()) report.h_max = std::max(report.h_max, mesh.element_h(id));

  double log_sum = 0.0;
  std::size_t fitted = 0;
  std::vector<GradingRecord> recs;
  for (Index id : mesh.active()) {
    GradingRecord g;
    g.element = id;
    g.h = mesh.element_h(id);
    g.r = mesh.element_distance(id, corner);
    const double arg = g.r - level_shift * g.h;
    g.exempt = g.r < 0.5 * g.h || arg <= 0.0;
    if (!g.exempt) {
      g.bound = report.h_max * std::cbrt(arg);
      log_sum += std::log(g.h) - std::log(g.bound);
      ++fitted;
    }
    recs.push_back(g);
  }
  report.fitted_constant = fitted > 0 ? std::exp(log_sum / static_cast<double>(fitted)) : 1.0;

  std::size_t satisfied = 0;
  for (auto& g : recs) {
    if (g.exempt) continue;
    const double envelope = 2.0 * report.fitted_constant * g.bound;
    g.upper_ok = g.h <= envelope;
    g.lower_ok = g.h >= 0.25 * envelope;  // constant/2 with the same fit
    if (g.upper_ok) ++satisfied;
  }
  report.satisfied_fraction = fitted > 0 ? static_cast<double>(satisfied) /
                                               static_cast<double>(fitted)
                                         : 1.0;
  report.records = std::move(recs);
  return report;
}

}  // namespace

GradingReport grading_report(const MacroMesh& mesh, const Point& corner) {
  return grading_common(mesh, corner, 0.0);
}

GradingReport grading_report_kl(const MacroMesh& mesh, int levels, const Point& corner) {
  const double shift = 0.5 * (1.0 - std::pow(2.0, -static_cast<double>(levels)));
  return grading_common(mesh, corner, shift);
}

}  // namespace klref
