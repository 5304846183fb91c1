#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace mcrm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raw Markov chain choice model parameters, before validation.
///
/// rho(i, j) is the probability that a customer leaving product i moves to
/// product j, so the visit vector solves v = theta + rho'^T v where rho' scales
/// row i by the non-purchase probability at i.
struct McParameters {
  VectorXd theta;
  MatrixXd rho;
  VectorXd alpha;
  VectorXd beta;
  VectorXd psi;
  VectorXd x_lower;
  VectorXd x_upper;
};

struct ValidationOptions {
  double theta_tolerance = 1e-9;
  double row_sum_tolerance = 1e-12;
  double q_range_tolerance = 1e-12;
  /// Squarings of rho tried before giving up on certifying spectral radius < 1.
  /// Zero means 10 * J (at least 64).
  int power_budget = 0;
  double contraction_threshold = 1.0 - 1e-9;
};

struct Violation {
  std::string rule;
  std::string detail;
  std::vector<Index> indices;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(const std::string& rule) const;
  std::string summary() const;
};

struct ValidationOutcome;

/// A validated, immutable choice model instance.
class McInstance {
 public:
  Index size() const { return params_.theta.size(); }
  const McParameters& params() const { return params_; }

  const VectorXd& theta() const { return params_.theta; }
  const MatrixXd& rho() const { return params_.rho; }
  const VectorXd& alpha() const { return params_.alpha; }
  const VectorXd& beta() const { return params_.beta; }
  const VectorXd& psi() const { return params_.psi; }
  const VectorXd& x_lower() const { return params_.x_lower; }
  const VectorXd& x_upper() const { return params_.x_upper; }

  /// Purchase probability Q_j(price) = exp(alpha_j - beta_j price).
  double attraction(Index j, double price) const;
  VectorXd attractions(const VectorXd& prices) const;

  /// Visit vector with no product offered, which bounds every other visit vector.
  const VectorXd& max_visits() const { return max_visits_; }

 private:
  friend ValidationOutcome validate_instance(McParameters, const ValidationOptions&);
  explicit McInstance(McParameters params);

  McParameters params_;
  VectorXd max_visits_;
};

struct ValidationOutcome {
  std::optional<McInstance> instance;
  ValidationReport report;
};

/// Checks every model assumption and returns a validated instance or the full
/// list of violations. Theta within theta_tolerance of summing to one is
/// renormalized.
ValidationOutcome validate_instance(McParameters raw, const ValidationOptions& options = {});

/// Throws std::invalid_argument with the report summary when validation fails.
McInstance make_instance(McParameters raw, const ValidationOptions& options = {});

/// Resource usage matrix and capacities. A resource without a capacity is
/// unconstrained and never compiled into a program.
struct ResourceModel {
  MatrixXd phi;  // resources x products
  std::vector<std::optional<double>> capacity;
  double lambda_bar = 1.0;

  Index size() const { return phi.rows(); }
  bool constrained() const;

  static ResourceModel none(Index products, double lambda_bar = 1.0);
};

/// Checks shapes and nonnegativity against an instance; empty result means valid.
ValidationReport validate_resources(const ResourceModel& rm, Index products);

/// Subset of product indices in canonical sorted order.
class Assortment {
 public:
  Assortment() = default;
  Assortment(std::initializer_list<Index> members);
  explicit Assortment(std::vector<Index> members);

  static Assortment full(Index products);
  static Assortment from_mask(std::uint64_t mask, Index products);
  /// Products with intensity above threshold.
  static Assortment support(const VectorXd& values, double threshold);

  bool contains(Index j) const;
  bool empty() const { return members_.empty(); }
  Index size() const { return static_cast<Index>(members_.size()); }
  const std::vector<Index>& members() const { return members_; }
  bool subset_of(const Assortment& other) const;

  /// 0/1 intensity vector of the given length.
  VectorXd indicator(Index products) const;
  std::string to_string() const;

  friend auto operator<=>(const Assortment&, const Assortment&) = default;
  friend bool operator==(const Assortment&, const Assortment&) = default;

 private:
  std::vector<Index> members_;
};

/// Visit vector for fractional availability a in [0,1]^J:
///   v_j = theta_j + sum_i [1 - a_i Q_i(x_i)] rho_ij v_i.
VectorXd solve_balance(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices);
VectorXd solve_balance(const McInstance& inst, const Assortment& offered, const VectorXd& prices);

/// Max-norm residual of the balance equations at (v, a, x).
double balance_residual(const McInstance& inst, const VectorXd& visits, const VectorXd& intensity,
                        const VectorXd& prices);

/// P_j = a_j Q_j(x_j) v_j, with v from the balance equations.
VectorXd choice_probabilities(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices);
VectorXd choice_probabilities(const McInstance& inst, const Assortment& offered, const VectorXd& prices);

/// lambda_bar * sum_j (x_j - psi_j) P_j.
double expected_profit(const McInstance& inst, const ResourceModel& rm, const Assortment& offered,
                       const VectorXd& prices);
double expected_profit(const McInstance& inst, const ResourceModel& rm, const VectorXd& intensity,
                       const VectorXd& prices);

/// lambda_bar * phi P, one entry per resource.
VectorXd resource_usage(const McInstance& inst, const ResourceModel& rm, const Assortment& offered,
                        const VectorXd& prices);
VectorXd resource_usage(const McInstance& inst, const ResourceModel& rm, const VectorXd& intensity,
                        const VectorXd& prices);

bool within_capacity(const ResourceModel& rm, const VectorXd& usage, double tol = 1e-9);

}  // namespace mcrm

template <>
struct std::hash<mcrm::Assortment> {
  std::size_t operator()(const mcrm::Assortment& a) const noexcept;
};
