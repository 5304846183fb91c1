#pragma once

#include "mcrm/conic.hpp"
#include "mcrm/mc_model.hpp"
#include "mcrm/pipeline.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mcrm {

struct OracleSettings {
  /// Price grid step; zero picks 1e-3 for up to two products, 1e-2 for three
  /// and 5e-2 beyond.
  double grid_step = 0.0;
  int multistarts = 20;
  Index assortment_cap = 12;
  std::int64_t monte_carlo_samples = 1'000'000;
  int schedule_samples = 500;
  std::uint64_t seed = 1;

  double step_for(Index products) const;
};

/// Profit and sales of single assortments at given prices, for small J.
/// Assortments are bit masks over products.
class ProfitEvaluator {
 public:
  static constexpr Index max_products = 12;

  explicit ProfitEvaluator(const McInstance& inst);

  Index size() const { return J_; }
  /// sum_{j in A} (x_j - psi_j) Q_j(x_j) v_j^A at unit arrival scale.
  double profit(std::uint64_t mask, const VectorXd& x) const;
  /// Q_j(x_j) v_j^A for j in A, zero elsewhere.
  VectorXd sales(std::uint64_t mask, const VectorXd& x) const;

 private:
  const McInstance& inst_;
  Index J_;
};

/// Bound on the l1 norm of the price gradient of any single-assortment profit
/// over the box, times lambda_bar:
///   L = lambda_bar sum_j (1 + 2 beta_j M) exp(alpha_j - beta_j x_lower_j) vmax_j,
/// with M the largest |x - psi| over the box and vmax the no-offer visits.
/// A grid of step h is within L h / 2 of the best price vector.
double lipschitz_bound(const McInstance& inst, double lambda_bar);

struct WeightedAssortment {
  Assortment assortment;
  double weight = 0.0;
};

struct OracleOptimum {
  double objective = 0.0;
  Assortment assortment;
  std::vector<WeightedAssortment> mixture;
  VectorXd x;
  double grid_step = 0.0;
  double lipschitz = 0.0;
  /// Refinement moved more than one grid cell away from the best grid point.
  bool grid_too_coarse = false;
};

/// Best mixture over all 2^J assortments at fixed prices, a linear program in
/// the weights. Without capacitated resources this is the best single assortment.
struct MixtureLp {
  double objective = 0.0;
  std::vector<WeightedAssortment> mixture;
  bool feasible = true;
};

MixtureLp best_mixture_at_prices(const McInstance& inst, const ResourceModel& rm, const VectorXd& x);

/// Exhaustive optimum: without resources, a price grid plus multistart
/// coordinate ascent for every assortment; with resources, the mixture LP over
/// a coarse grid of price vectors followed by the same refinement. Shares only
/// the linear-cone solver path with the main pipeline.
OracleOptimum enumerate_assortment_optimum(const McInstance& inst, const ResourceModel& rm,
                                           const OracleSettings& settings = {});

/// Best prices for one fixed assortment, optionally under the resource rows.
OracleOptimum best_prices_for_assortment(const McInstance& inst, const ResourceModel& rm, const Assortment& offered,
                                         const OracleSettings& settings = {});

struct CheckReport {
  std::string name;
  bool passed = true;
  int trials = 0;
  int failures = 0;
  /// Largest observed violation of the check's inequality; negative is slack.
  double worst_margin = -std::numeric_limits<double>::infinity();
  std::string detail;
  /// Parameters of the first failing instance, if any.
  std::optional<McParameters> counterexample;

  void record(double margin, double allowed);
};

struct RandomInstanceOptions {
  double rho_row_max = 0.9;
  double beta_min = 0.5, beta_max = 2.0;
  double x_lower_min = 0.5, x_lower_max = 1.5;
  double width_min = 1.0, width_max = 2.0;
  double alpha_noise = 0.5;
};

/// Valid-by-construction instance: theta from a flat Dirichlet, rho rows from a
/// Dirichlet scaled to a uniform row sum, alpha = beta x_lower - |noise|.
McInstance random_instance(Index products, std::mt19937_64& rng, const RandomInstanceOptions& options = {});

/// Capacities set to tightness times the usage of the full assortment at the
/// lower price bounds, so tightness < 1 usually binds.
ResourceModel random_resources(const McInstance& inst, Index resources, double tightness, std::mt19937_64& rng,
                               double lambda_bar = 1.0);

/// Small random changes to alpha, beta and psi that keep the instance valid.
McInstance perturb_instance(const McInstance& inst, std::mt19937_64& rng, double scale = 0.1);

/// Walks simulated customers through the chain and returns purchase
/// frequencies per product.
VectorXd simulate_choices(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices,
                          std::int64_t customers, std::uint64_t seed);

/// Largest |frequency - P_j| / sigma_j with sigma_j = sqrt(P_j (1 - P_j) / n).
double monte_carlo_z_score(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices,
                           std::int64_t customers, std::uint64_t seed);

/// Solves SP3 for the instance and perturbed copies and checks each recovered
/// availability lies within 1e-6 of 0 or 1.
CheckReport check_integrality_no_resources(const McInstance& inst, int trials, const OracleSettings& settings = {},
                                           const SolverSettings& solver = {});

/// Samples feasible two- and three-segment schedules of prices and assortments
/// and checks none beats the reference optimum by more than 1e-6. Includes a
/// two-price split around the reference prices on its offered products.
CheckReport verify_constant_price_dominance(const McInstance& inst, const ResourceModel& rm,
                                            const PipelineResult& reference, const OracleSettings& settings = {});

/// Fixed-price mode against assortment enumeration and pricing-only mode
/// against a full-assortment price search.
CheckReport check_special_cases(const McInstance& inst, const ResourceModel& rm, const OracleSettings& settings = {},
                                const SolverSettings& solver = {});

/// |pipeline optimum - oracle optimum| <= L h + 1e-4 when unconstrained; with
/// resources the oracle must not beat the pipeline by more than 1e-4.
CheckReport check_oracle_sandwich(const McInstance& inst, const ResourceModel& rm, const PipelineResult& reference,
                                  const OracleSettings& settings = {});

}  // namespace mcrm
