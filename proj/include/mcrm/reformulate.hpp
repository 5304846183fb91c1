#pragma once

#include "mcrm/conic.hpp"
#include "mcrm/mc_model.hpp"

#include <string_view>
#include <vector>

namespace mcrm {

enum class ProgramKind { SP3, RP2, RP3, SD1 };

std::string_view to_string(ProgramKind kind);

/// Column and row indices of every model symbol in a compiled program. Entries
/// that do not exist for a program kind are left empty; resource rows for
/// uncapacitated resources are -1.
struct VariableMap {
  ProgramKind kind = ProgramKind::SP3;
  Index products = 0;
  /// Multiplier applied to the revenue objective (lambda_bar for RP2/RP3).
  double objective_scale = 1.0;

  // Primal programs: columns.
  std::vector<Index> v, d, u;
  // Primal programs: rows. cone and offer give the first row of each 3-row block.
  std::vector<Index> balance, upper, lower, cone, offer, resource;

  // SD1: columns.
  std::vector<Index> eta, pi1, pi2, pi3, nu_upper, nu_lower;
};

struct CompiledProgram {
  ConicProgram program;
  VariableMap map;
};

/// max sum_j (u_j - psi_j d_j)
///   s.t. v_j = theta_j + sum_i rho_ij (v_i - d_i),
///        (v_j, d_j, beta_j u_j - alpha_j d_j) in K_exp,
///        x_lower_j d_j <= u_j <= x_upper_j d_j.
CompiledProgram build_sp3(const McInstance& inst);

/// SP3 with the objective scaled by lambda_bar and one row
/// lambda_bar sum_j phi_rj d_j <= capacity_r per capacitated resource.
CompiledProgram build_rp2(const McInstance& inst, const ResourceModel& rm);

/// RP2 plus (d_j, v_j, (alpha_j - beta_j x_upper_j) v_j) in K_exp for every j,
/// which forces full availability wherever a product is visited.
CompiledProgram build_rp3(const McInstance& inst, const ResourceModel& rm);

/// min sum_j theta_j eta_j
///   s.t. pi_j1 - eta_j + sum_i rho_ji eta_i = 0,
///        pi_j2 - alpha_j pi_j3 - sum_i rho_ji eta_i + nu_upper_j x_upper_j - nu_lower_j x_lower_j = psi_j,
///        beta_j pi_j3 + nu_lower_j - nu_upper_j = -1,
///        pi_j in K*_exp, nu_upper, nu_lower >= 0.
CompiledProgram build_dual_sd1(const McInstance& inst);

/// A point of the SD1 feasible set. pi is J x 3.
struct DualPoint {
  VectorXd eta;
  Eigen::MatrixX3d pi;
  VectorXd nu_upper;
  VectorXd nu_lower;
};

/// Strictly feasible SD1 point with nu = 0, pi_j3 = -1/beta_j,
/// pi_j1 = 1 + exp(alpha_j - beta_j psi_j - 1) / beta_j, eta = (I - rho)^{-1} pi_.1 and
/// pi_j2 = psi_j - alpha_j / beta_j + sum_i rho_ji eta_i. Every pi_j has
/// interior margin at least 1.
DualPoint strictly_feasible_dual_point(const McInstance& inst);

/// Reads the SD1 point carried by the dual vector of a solved SP3 program.
DualPoint dual_point_from_sp3(const VectorXd& y, const VariableMap& sp3_map);

/// Column vector of an SD1 program for a dual point.
VectorXd sd1_columns(const DualPoint& point, const VariableMap& sd1_map);

double sd1_objective(const McInstance& inst, const DualPoint& point);

/// Max-norm residual over the three SD1 equality families.
double sd1_equality_residual(const McInstance& inst, const DualPoint& point);

/// Smallest interior margin pi_j1 + pi_j3 exp(pi_j2 / pi_j3 - 1) over j.
double sd1_min_margin(const DualPoint& point);

/// Maps a decision (x, a) and its visit vector to (v, d, u) columns of a
/// primal program: d_j = a_j Q_j(x_j) v_j, u_j = x_j d_j.
VectorXd primal_columns(const McInstance& inst, const VariableMap& map, const VectorXd& visits,
                        const VectorXd& intensity, const VectorXd& prices);

/// Largest violation of the primal constraints at x, measured as the
/// distance of A x - b (sign-adjusted) from each cone block.
double primal_violation(const ConicProgram& program, const VectorXd& x);

}  // namespace mcrm
