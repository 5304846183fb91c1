#include "mcrm/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcrm {

double decision_objective(const McInstance& inst, double lambda_bar, const VectorXd& prices,
                          const VectorXd& intensity) {
  return expected_profit(inst, ResourceModel::none(inst.size(), lambda_bar), intensity, prices);
}

StaticDecision recover_decision(const PrimalDualSolution& sol, const VariableMap& map, const McInstance& inst,
                                const RecoveryOptions& opt) {
  const Index J = inst.size();
  StaticDecision dec;
  dec.x.resize(J);
  dec.a.resize(J);
  for (Index j = 0; j < J; ++j) {
    const auto k = static_cast<std::size_t>(j);
    const double v = sol.x[map.v[k]], d = sol.x[map.d[k]], u = sol.x[map.u[k]];
    const double lo = inst.x_lower()[j], hi = inst.x_upper()[j];
    if (d < -opt.drift_tolerance)
      throw DriftExceeded("negative sales " + std::to_string(d) + " for product " + std::to_string(j), j, -d);
    if (d <= opt.zero_sales) {
      dec.x[j] = lo;
      dec.a[j] = 0.0;
      continue;
    }
    const double x = u / d;
    const double x_drift = std::max({lo - x, x - hi, 0.0});
    if (x_drift > opt.drift_tolerance)
      throw DriftExceeded("price of product " + std::to_string(j) + " outside its bounds by " +
                              std::to_string(x_drift), j, x_drift);
    dec.x[j] = std::clamp(x, lo, hi);
    const double reach = inst.attraction(j, dec.x[j]) * v;
    const double a = reach > 0 ? d / reach : std::numeric_limits<double>::infinity();
    const double a_drift = std::max(a - 1.0, 0.0);
    if (a_drift > opt.drift_tolerance)
      throw DriftExceeded("availability of product " + std::to_string(j) + " exceeds one by " +
                              std::to_string(a_drift), j, a_drift);
    dec.a[j] = std::clamp(a, 0.0, 1.0);
  }
  dec.raw_a = dec.a;
  const bool capacitated = std::any_of(map.resource.begin(), map.resource.end(), [](Index r) { return r >= 0; });
  if (!capacitated) {
    for (Index j = 0; j < J; ++j) {
      if (dec.a[j] <= opt.integral_snap) dec.a[j] = 0.0;
      else if (dec.a[j] >= 1.0 - opt.integral_snap) dec.a[j] = 1.0;
    }
  }
  dec.v = solve_balance(inst, dec.a, dec.x);
  dec.objective = decision_objective(inst, map.objective_scale, dec.x, dec.a);
  const double mismatch = std::abs(dec.objective - sol.primal_objective);
  if (mismatch > opt.objective_tolerance)
    throw DriftExceeded("recovered objective differs from the conic objective by " + std::to_string(mismatch), -1,
                        mismatch);
  return dec;
}

double AssortmentMixture::total_weight() const {
  double w = 0.0;
  for (const auto& c : components) w += c.weight;
  return w;
}

AssortmentMixture dimension_reduction(const StaticDecision& dec, const McInstance& inst,
                                      const ReductionOptions& opt) {
  const Index J = inst.size();
  AssortmentMixture mix;
  mix.x = dec.x;
  VectorXd v_hat = dec.v;
  VectorXd a_hat = dec.a;
  // Sales mass a_hat * v_hat is carried directly; a_hat is derived from it.
  VectorXd mass = a_hat.cwiseProduct(v_hat);
  double remaining = 1.0;

  for (Index k = 0; k <= J; ++k) {
    const Assortment A = Assortment::support(mass, opt.support_threshold);
    ReductionStep step{v_hat, a_hat, A, 1.0};
    if (A.empty()) {
      mix.trace.push_back(step);
      mix.components.push_back({A, remaining, solve_balance(inst, A, dec.x)});
      return mix;
    }

    const VectorXd vA = solve_balance(inst, A, dec.x);
    double y = std::numeric_limits<double>::infinity();
    for (Index j : A.members()) {
      if (!(vA[j] > 0)) throw NonConvergence("offered product " + std::to_string(j) + " has no visits");
      y = std::min(y, mass[j] / vA[j]);
    }
    y = std::min(y, 1.0);
    step.y = y;
    mix.trace.push_back(step);

    if (1.0 - y < opt.unit_guard) {
      mix.trace.back().y = 1.0;
      mix.components.push_back({A, remaining, vA});
      return mix;
    }
    mix.components.push_back({A, remaining * y, vA});
    remaining *= 1.0 - y;

    v_hat = (v_hat - y * vA) / (1.0 - y);
    VectorXd next = VectorXd::Zero(J);
    for (Index j : A.members()) next[j] = std::max((mass[j] - y * vA[j]) / (1.0 - y), 0.0);
    mass = next;
    for (Index j = 0; j < J; ++j) a_hat[j] = v_hat[j] > 0 ? mass[j] / v_hat[j] : 0.0;
  }
  throw NonConvergence("support did not shrink within " + std::to_string(J + 1) + " passes");
}

double mixture_objective(const McInstance& inst, double lambda_bar, const AssortmentMixture& mix) {
  double total = 0.0;
  for (const auto& c : mix.components) {
    double inner = 0.0;
    for (Index j : c.assortment.members())
      inner += (mix.x[j] - inst.psi()[j]) * inst.attraction(j, mix.x[j]) * c.visits[j];
    total += c.weight * inner;
  }
  return lambda_bar * total;
}

VectorXd mixture_usage(const McInstance& inst, const ResourceModel& rm, const AssortmentMixture& mix) {
  VectorXd sales = VectorXd::Zero(inst.size());
  for (const auto& c : mix.components)
    for (Index j : c.assortment.members()) sales[j] += c.weight * inst.attraction(j, mix.x[j]) * c.visits[j];
  return rm.lambda_bar * (rm.phi * sales);
}

StaticDecision aggregate_mixture(const McInstance& inst, double lambda_bar, const AssortmentMixture& mix) {
  const Index J = inst.size();
  StaticDecision dec;
  dec.x = mix.x;
  dec.v = VectorXd::Zero(J);
  VectorXd mass = VectorXd::Zero(J);
  for (const auto& c : mix.components) {
    dec.v += c.weight * c.visits;
    for (Index j : c.assortment.members()) mass[j] += c.weight * c.visits[j];
  }
  dec.a = VectorXd::Zero(J);
  for (Index j = 0; j < J; ++j) dec.a[j] = dec.v[j] > 0 ? mass[j] / dec.v[j] : 0.0;
  double obj = 0.0;
  for (Index j = 0; j < J; ++j)
    obj += (dec.x[j] - inst.psi()[j]) * inst.attraction(j, dec.x[j]) * mass[j];
  dec.objective = lambda_bar * obj;
  return dec;
}

double reconstruction_error(const AssortmentMixture& mix, const StaticDecision& dec) {
  VectorXd mass = VectorXd::Zero(dec.v.size());
  for (const auto& c : mix.components)
    for (Index j : c.assortment.members()) mass[j] += c.weight * c.visits[j];
  return (mass - dec.a.cwiseProduct(dec.v)).lpNorm<Eigen::Infinity>();
}

OfferSchedule mixture_to_schedule(const AssortmentMixture& mix, double horizon) {
  OfferSchedule plan;
  plan.horizon = horizon;
  plan.x = mix.x;
  double t = 0.0;
  for (std::size_t k = 0; k < mix.components.size(); ++k) {
    const double end = k + 1 == mix.components.size() ? horizon : t + mix.components[k].weight * horizon;
    plan.intervals.push_back({t, end, mix.components[k].assortment});
    t = end;
  }
  return plan;
}

double schedule_objective(const McInstance& inst, double lambda_bar, const OfferSchedule& plan) {
  const ResourceModel none = ResourceModel::none(inst.size(), lambda_bar);
  double total = 0.0;
  for (const auto& iv : plan.intervals)
    total += (iv.end - iv.start) / plan.horizon * expected_profit(inst, none, iv.assortment, plan.x);
  return total;
}

VectorXd schedule_usage(const McInstance& inst, const ResourceModel& rm, const OfferSchedule& plan) {
  VectorXd total = VectorXd::Zero(rm.size());
  for (const auto& iv : plan.intervals)
    total += (iv.end - iv.start) / plan.horizon * resource_usage(inst, rm, iv.assortment, plan.x);
  return total;
}

}  // namespace mcrm
