#include "mcrm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <string>

namespace mcrm {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Network: return "network";
    case Mode::Static: return "static";
    case Mode::PricingOnly: return "pricing-only";
    case Mode::FixedPrice: return "fixed-price";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view text) {
  for (Mode m : {Mode::Network, Mode::Static, Mode::PricingOnly, Mode::FixedPrice})
    if (to_string(m) == text) return m;
  return std::nullopt;
}

SolverFailure::SolverFailure(const PrimalDualSolution& sol)
    : std::runtime_error("conic solve ended with status " + std::string(to_string(sol.status)) + " after " +
                         std::to_string(sol.iterations) + " iterations (residuals " +
                         std::to_string(sol.primal_residual) + ", " + std::to_string(sol.dual_residual) + ", " +
                         std::to_string(sol.duality_gap) + ")"),
      status_(sol.status) {}

McInstance pin_prices(const McInstance& inst, const VectorXd& target) {
  McParameters p = inst.params();
  p.x_lower = target;
  p.x_upper = target;
  return make_instance(std::move(p));
}

namespace {

CompiledProgram compile(Mode mode, const McInstance& inst, const ResourceModel& rm) {
  switch (mode) {
    case Mode::Static: return build_sp3(inst);
    case Mode::PricingOnly: return build_rp3(inst, rm);
    case Mode::Network:
    case Mode::FixedPrice: break;
  }
  return build_rp2(inst, rm);
}

bool capacitated(const VariableMap& map) {
  return std::any_of(map.resource.begin(), map.resource.end(), [](Index r) { return r >= 0; });
}

bool integral(const VectorXd& a, double tol) {
  for (Index j = 0; j < a.size(); ++j)
    if (std::min(a[j], 1.0 - a[j]) > tol) return false;
  return true;
}

}  // namespace

PipelineResult run_pipeline(const McInstance& input, const ResourceModel& rm, const PipelineOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  McInstance inst = input;
  if (opt.mode == Mode::FixedPrice) {
    const VectorXd target = opt.target_prices ? *opt.target_prices : VectorXd((input.x_lower() + input.x_upper()) / 2);
    inst = pin_prices(input, target);
  }

  PipelineResult out{opt.mode, inst, compile(opt.mode, inst, rm), {}, {}, {}, {}, 0.0, {}, 0.0, 0.0};
  SolverSettings settings = opt.solver;
  for (int attempt = 0;; ++attempt) {
    out.solution = solve(out.compiled.program, settings);
    if (!out.solution.optimal()) throw SolverFailure(out.solution);
    const bool last = attempt >= opt.drift_retries || settings.tolerance <= 1e-12;
    try {
      out.decision = recover_decision(out.solution, out.compiled.map, inst, opt.recovery);
      // Without capacity rows the optimum is integral, so an availability
      // away from the bounds is solver error. Aim well inside the snap band.
      if (last || capacitated(out.compiled.map) || integral(out.decision.raw_a, 0.1 * opt.recovery.integral_snap)) break;
    } catch (const DriftExceeded&) {
      if (last) throw;
    }
    settings.tolerance = std::max(settings.tolerance * 1e-2, 1e-12);
  }
  out.tolerance_used = settings.tolerance;

  // Static mode solved SP3 at unit scale; everything reported is lambda-scaled.
  if (opt.mode == Mode::Static) out.decision.objective *= rm.lambda_bar;
  out.mixture = dimension_reduction(out.decision, inst, opt.reduction);
  out.schedule = mixture_to_schedule(out.mixture, opt.horizon);
  out.objective = mixture_objective(inst, rm.lambda_bar, out.mixture);
  out.usage = mixture_usage(inst, rm, out.mixture);
  out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace mcrm
