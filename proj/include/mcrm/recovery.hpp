#pragma once

#include "mcrm/conic.hpp"
#include "mcrm/mc_model.hpp"
#include "mcrm/reformulate.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace mcrm {

/// Recovered decision left the feasible box by more than the drift tolerance.
class DriftExceeded : public std::runtime_error {
 public:
  DriftExceeded(const std::string& what, Index product, double drift)
      : std::runtime_error(what), product_(product), drift_(drift) {}
  Index product() const { return product_; }
  double drift() const { return drift_; }

 private:
  Index product_;
  double drift_;
};

/// Dimension reduction did not shrink its support; the input was not feasible.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StaticDecision {
  VectorXd x;
  VectorXd a;
  VectorXd v;
  double objective = 0.0;
  /// Availability as computed from the conic solution, before snapping.
  VectorXd raw_a;
};

struct RecoveryOptions {
  /// d_j at or below this counts as zero sales.
  double zero_sales = 1e-7;
  double drift_tolerance = 1e-6;
  double objective_tolerance = 1e-6;
  /// Without capacity rows an optimal availability is integral; values this
  /// close to 0 or 1 are snapped there.
  double integral_snap = 1e-6;
};

/// x_j = u_j / d_j and a_j = d_j / (Q_j(x_j) v_j) where d_j > 0, otherwise
/// x_j = x_lower_j and a_j = 0. Small excursions outside the box are clamped,
/// near-integral availabilities are snapped when the program has no capacity
/// rows, and v is then re-solved from the balance equations at (x, a). A
/// decision objective off the conic objective by more than the tolerance is
/// reported as DriftExceeded with product -1.
StaticDecision recover_decision(const PrimalDualSolution& sol, const VariableMap& map, const McInstance& inst,
                                const RecoveryOptions& options = {});

/// lambda * sum_j (x_j - psi_j) a_j Q_j(x_j) v_j with v re-solved.
double decision_objective(const McInstance& inst, double lambda_bar, const VectorXd& prices,
                          const VectorXd& intensity);

struct MixtureComponent {
  Assortment assortment;
  double weight = 0.0;
  VectorXd visits;
};

/// One pass of the reduction loop, kept for inspection.
struct ReductionStep {
  VectorXd v_hat;
  VectorXd a_hat;
  Assortment assortment;
  double y = 0.0;
};

struct AssortmentMixture {
  VectorXd x;
  std::vector<MixtureComponent> components;
  std::vector<ReductionStep> trace;

  Index size() const { return static_cast<Index>(components.size()); }
  double total_weight() const;
};

struct ReductionOptions {
  double support_threshold = 1e-9;
  /// 1 - y below this ends the loop as if y were exactly 1.
  double unit_guard = 1e-12;
};

/// Splits a fractional decision into a nested sequence of assortments with
/// weights w_k = (1 - y_1) ... (1 - y_{k-1}) y_k whose visit vectors average
/// back to a_j v_j. Throws NonConvergence after J + 1 passes.
AssortmentMixture dimension_reduction(const StaticDecision& decision, const McInstance& inst,
                                      const ReductionOptions& options = {});

/// lambda * sum_k w_k sum_{j in A_k} (x_j - psi_j) Q_j(x_j) v_j^{A_k}.
double mixture_objective(const McInstance& inst, double lambda_bar, const AssortmentMixture& mix);

/// lambda * sum_k w_k sum_{j in A_k} phi_rj Q_j(x_j) v_j^{A_k}, per resource.
VectorXd mixture_usage(const McInstance& inst, const ResourceModel& rm, const AssortmentMixture& mix);

/// Inverse direction: v_j = sum_A w^A v_j^A and
/// a_j = sum_{A contains j} w^A v_j^A / v_j (zero where v_j = 0).
StaticDecision aggregate_mixture(const McInstance& inst, double lambda_bar, const AssortmentMixture& mix);

/// Largest |sum_k 1(j in A_k) w_k v_j^{A_k} - a_j v_j| over j.
double reconstruction_error(const AssortmentMixture& mix, const StaticDecision& decision);

struct ScheduleInterval {
  double start = 0.0;
  double end = 0.0;
  Assortment assortment;
};

/// Offer plan over [0, horizon] at a constant price vector, assuming a
/// constant arrival rate so time shares equal customer shares.
struct OfferSchedule {
  double horizon = 1.0;
  VectorXd x;
  std::vector<ScheduleInterval> intervals;
};

OfferSchedule mixture_to_schedule(const AssortmentMixture& mix, double horizon);

/// Replays a schedule through the choice model: each interval earns its share
/// of lambda_bar times the single-assortment expected profit.
double schedule_objective(const McInstance& inst, double lambda_bar, const OfferSchedule& schedule);
VectorXd schedule_usage(const McInstance& inst, const ResourceModel& rm, const OfferSchedule& schedule);

}  // namespace mcrm
