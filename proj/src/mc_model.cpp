#include "mcrm/mc_model.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mcrm {

namespace {

constexpr Index kDenseLimit = 512;

void add(ValidationReport& report, std::string rule, std::string detail, std::vector<Index> indices = {}) {
  report.violations.push_back({std::move(rule), std::move(detail), std::move(indices)});
}

std::string index_list(const std::vector<Index>& idx) {
  std::ostringstream os;
  for (std::size_t k = 0; k < idx.size(); ++k) os << (k ? "," : "") << idx[k];
  return os.str();
}

// Repeated squaring of a nonnegative matrix: ||rho^(2^m)||_inf <= c < 1
// certifies spectral radius < 1, hence convergence of sum_n rho^n.
bool certify_contraction(const MatrixXd& rho, int budget, double threshold) {
  MatrixXd power = rho;
  for (int m = 0; m <= budget; ++m) {
    if (!power.allFinite()) return false;
    const double norm = power.cwiseAbs().rowwise().sum().maxCoeff();
    if (norm <= threshold) return true;
    if (norm > 1e12) return false;
    power = (power * power).eval();
  }
  return false;
}

VectorXd solve_system(const MatrixXd& system, const VectorXd& rhs) {
  if (system.rows() <= kDenseLimit) return system.partialPivLu().solve(rhs);
  Eigen::BiCGSTAB<MatrixXd> solver;
  solver.setTolerance(1e-12);
  solver.compute(system);
  return solver.solve(rhs);
}

}  // namespace

bool ValidationReport::has(const std::string& rule) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule == rule; });
}

std::string ValidationReport::summary() const {
  if (ok()) return "valid";
  std::ostringstream os;
  for (std::size_t k = 0; k < violations.size(); ++k) {
    const auto& v = violations[k];
    os << (k ? "; " : "") << v.rule << ": " << v.detail;
    if (!v.indices.empty()) os << " [" << index_list(v.indices) << "]";
  }
  return os.str();
}

ValidationOutcome validate_instance(McParameters raw, const ValidationOptions& options) {
  ValidationOutcome out;
  auto& report = out.report;

  const Index n = raw.theta.size();
  if (n < 1) {
    add(report, "dimension", "at least one product is required");
    return out;
  }
  const bool shapes_ok = raw.rho.rows() == n && raw.rho.cols() == n && raw.alpha.size() == n &&
                         raw.beta.size() == n && raw.psi.size() == n && raw.x_lower.size() == n &&
                         raw.x_upper.size() == n;
  if (!shapes_ok) {
    add(report, "dimension", "all parameter arrays must match the product count " + std::to_string(n));
    return out;
  }
  const bool finite = raw.theta.allFinite() && raw.rho.allFinite() && raw.alpha.allFinite() &&
                      raw.beta.allFinite() && raw.psi.allFinite() && raw.x_lower.allFinite() &&
                      raw.x_upper.allFinite();
  if (!finite) {
    add(report, "finite", "parameters must be finite numbers");
    return out;
  }

  std::vector<Index> bad;
  for (Index j = 0; j < n; ++j)
    if (raw.theta[j] < 0) bad.push_back(j);
  if (!bad.empty()) add(report, "theta nonnegative", "arrival probabilities must be >= 0", bad);

  const double total = raw.theta.sum();
  if (std::abs(total - 1.0) > options.theta_tolerance) {
    std::ostringstream os;
    os.precision(12);
    os << "arrival probabilities sum to " << total << ", expected 1";
    add(report, "theta normalization", os.str());
  } else if (total > 0) {
    raw.theta /= total;
  }

  bad.clear();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (raw.rho(i, j) < 0) bad.push_back(i);
  bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
  if (!bad.empty()) add(report, "rho nonnegative", "transition rows with negative entries", bad);

  bad.clear();
  for (Index i = 0; i < n; ++i)
    if (raw.rho.row(i).sum() > 1.0 + options.row_sum_tolerance) bad.push_back(i);
  if (!bad.empty()) add(report, "rho row sum", "transition rows summing above 1", bad);

  const int budget = options.power_budget > 0 ? options.power_budget : std::max<int>(64, 10 * static_cast<int>(n));
  if (!certify_contraction(raw.rho.cwiseAbs(), budget, options.contraction_threshold)) {
    add(report, "neumann divergence", "cannot certify spectral radius of rho below 1 (I - rho singular or nearly so)");
  }

  bad.clear();
  for (Index j = 0; j < n; ++j)
    if (!(raw.beta[j] > 0)) bad.push_back(j);
  if (!bad.empty()) add(report, "beta positive", "price sensitivities must be > 0", bad);

  bad.clear();
  for (Index j = 0; j < n; ++j)
    if (raw.x_lower[j] > raw.x_upper[j]) bad.push_back(j);
  if (!bad.empty()) add(report, "price bounds", "lower price bound above upper bound", bad);

  bad.clear();
  for (Index j = 0; j < n; ++j)
    if (raw.alpha[j] - raw.beta[j] * raw.x_lower[j] > options.q_range_tolerance) bad.push_back(j);
  if (!bad.empty()) add(report, "q range", "alpha - beta * x_lower must be <= 0 so purchase probabilities stay in [0,1]", bad);

  if (report.ok()) out.instance.emplace(McInstance(std::move(raw)));
  return out;
}

McInstance make_instance(McParameters raw, const ValidationOptions& options) {
  auto outcome = validate_instance(std::move(raw), options);
  if (!outcome.instance) throw std::invalid_argument("invalid instance: " + outcome.report.summary());
  return std::move(*outcome.instance);
}

McInstance::McInstance(McParameters params) : params_(std::move(params)) {
  const Index n = size();
  max_visits_ = solve_system(MatrixXd::Identity(n, n) - params_.rho.transpose(), params_.theta);
}

double McInstance::attraction(Index j, double price) const {
  return std::exp(params_.alpha[j] - params_.beta[j] * price);
}

VectorXd McInstance::attractions(const VectorXd& prices) const {
  return (params_.alpha - params_.beta.cwiseProduct(prices)).array().exp().matrix();
}

bool ResourceModel::constrained() const {
  return std::any_of(capacity.begin(), capacity.end(), [](const auto& c) { return c.has_value(); });
}

ResourceModel ResourceModel::none(Index products, double lambda_bar) {
  ResourceModel rm;
  rm.phi = MatrixXd::Zero(0, products);
  rm.lambda_bar = lambda_bar;
  return rm;
}

ValidationReport validate_resources(const ResourceModel& rm, Index products) {
  ValidationReport report;
  if (rm.phi.cols() != products || static_cast<Index>(rm.capacity.size()) != rm.phi.rows()) {
    add(report, "dimension", "resource usage matrix must be resources x products with one capacity per resource");
    return report;
  }
  if (!rm.phi.allFinite() || (rm.phi.array() < 0).any()) {
    add(report, "phi nonnegative", "resource usage entries must be finite and >= 0");
  }
  std::vector<Index> bad;
  for (Index r = 0; r < rm.phi.rows(); ++r) {
    const auto& c = rm.capacity[static_cast<std::size_t>(r)];
    if (c && !(std::isfinite(*c) && *c >= 0)) bad.push_back(r);
  }
  if (!bad.empty()) add(report, "capacity nonnegative", "capacities must be finite and >= 0", bad);
  if (!(std::isfinite(rm.lambda_bar) && rm.lambda_bar > 0)) {
    add(report, "lambda_bar positive", "aggregate arrival mass must be > 0");
  }
  return report;
}

Assortment::Assortment(std::initializer_list<Index> members) : Assortment(std::vector<Index>(members)) {}

Assortment::Assortment(std::vector<Index> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

Assortment Assortment::full(Index products) {
  std::vector<Index> all(static_cast<std::size_t>(products));
  for (Index j = 0; j < products; ++j) all[static_cast<std::size_t>(j)] = j;
  return Assortment(std::move(all));
}

Assortment Assortment::from_mask(std::uint64_t mask, Index products) {
  std::vector<Index> members;
  for (Index j = 0; j < products; ++j)
    if (mask & (std::uint64_t{1} << j)) members.push_back(j);
  return Assortment(std::move(members));
}

Assortment Assortment::support(const VectorXd& values, double threshold) {
  std::vector<Index> members;
  for (Index j = 0; j < values.size(); ++j)
    if (values[j] > threshold) members.push_back(j);
  return Assortment(std::move(members));
}

bool Assortment::contains(Index j) const { return std::binary_search(members_.begin(), members_.end(), j); }

bool Assortment::subset_of(const Assortment& other) const {
  return std::includes(other.members_.begin(), other.members_.end(), members_.begin(), members_.end());
}

VectorXd Assortment::indicator(Index products) const {
  VectorXd out = VectorXd::Zero(products);
  for (Index j : members_) out[j] = 1.0;
  return out;
}

std::string Assortment::to_string() const {
  return "{" + index_list(members_) + "}";
}

VectorXd solve_balance(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices) {
  const Index n = inst.size();
  // Non-purchase probability at each product scales its outgoing transitions.
  const VectorXd stay = VectorXd::Ones(n) - intensity.cwiseProduct(inst.attractions(prices));
  MatrixXd system = -inst.rho().transpose() * stay.asDiagonal();
  system.diagonal().array() += 1.0;
  return solve_system(system, inst.theta());
}

VectorXd solve_balance(const McInstance& inst, const Assortment& offered, const VectorXd& prices) {
  return solve_balance(inst, offered.indicator(inst.size()), prices);
}

double balance_residual(const McInstance& inst, const VectorXd& visits, const VectorXd& intensity,
                        const VectorXd& prices) {
  const VectorXd stay = VectorXd::Ones(inst.size()) - intensity.cwiseProduct(inst.attractions(prices));
  const VectorXd rhs = inst.theta() + inst.rho().transpose() * stay.cwiseProduct(visits);
  return (visits - rhs).cwiseAbs().maxCoeff();
}

VectorXd choice_probabilities(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices) {
  const VectorXd v = solve_balance(inst, intensity, prices);
  return intensity.cwiseProduct(inst.attractions(prices)).cwiseProduct(v);
}

VectorXd choice_probabilities(const McInstance& inst, const Assortment& offered, const VectorXd& prices) {
  return choice_probabilities(inst, offered.indicator(inst.size()), prices);
}

double expected_profit(const McInstance& inst, const ResourceModel& rm, const VectorXd& intensity,
                       const VectorXd& prices) {
  const VectorXd p = choice_probabilities(inst, intensity, prices);
  return rm.lambda_bar * (prices - inst.psi()).dot(p);
}

double expected_profit(const McInstance& inst, const ResourceModel& rm, const Assortment& offered,
                       const VectorXd& prices) {
  return expected_profit(inst, rm, offered.indicator(inst.size()), prices);
}

VectorXd resource_usage(const McInstance& inst, const ResourceModel& rm, const VectorXd& intensity,
                        const VectorXd& prices) {
  if (rm.size() == 0) return VectorXd::Zero(0);
  return rm.lambda_bar * (rm.phi * choice_probabilities(inst, intensity, prices));
}

VectorXd resource_usage(const McInstance& inst, const ResourceModel& rm, const Assortment& offered,
                        const VectorXd& prices) {
  return resource_usage(inst, rm, offered.indicator(inst.size()), prices);
}

bool within_capacity(const ResourceModel& rm, const VectorXd& usage, double tol) {
  for (Index r = 0; r < rm.size(); ++r) {
    const auto& c = rm.capacity[static_cast<std::size_t>(r)];
    if (c && usage[r] > *c + tol) return false;
  }
  return true;
}

}  // namespace mcrm

std::size_t std::hash<mcrm::Assortment>::operator()(const mcrm::Assortment& a) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  for (auto j : a.members()) h ^= std::hash<Eigen::Index>{}(j) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}
