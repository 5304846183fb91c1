#include "mcrm/reformulate.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace mcrm {

std::string_view to_string(ProgramKind kind) {
  switch (kind) {
    case ProgramKind::SP3: return "SP3";
    case ProgramKind::RP2: return "RP2";
    case ProgramKind::RP3: return "RP3";
    case ProgramKind::SD1: return "SD1";
  }
  return "unknown";
}

namespace {

std::string indexed(std::string_view name, Index j) { return std::string(name) + "[" + std::to_string(j) + "]"; }

std::string indexed(std::string_view name, Index j, int k) { return indexed(name, j) + "." + std::to_string(k); }

// Shared body of SP3, RP2 and RP3. rm may be null for SP3.
CompiledProgram build_primal(const McInstance& inst, const ResourceModel* rm, ProgramKind kind) {
  const Index J = inst.size();
  const double scale = rm ? rm->lambda_bar : 1.0;
  ProgramBuilder b(Sense::Maximize);
  VariableMap vm;
  vm.kind = kind;
  vm.products = J;
  vm.objective_scale = scale;

  for (Index j = 0; j < J; ++j) vm.v.push_back(b.add_column(indexed("v", j)));
  for (Index j = 0; j < J; ++j) vm.d.push_back(b.add_column(indexed("d", j), -scale * inst.psi()[j]));
  for (Index j = 0; j < J; ++j) vm.u.push_back(b.add_column(indexed("u", j), scale));

  const auto& rho = inst.rho();
  b.open_block(ConeKind::Zero);
  for (Index j = 0; j < J; ++j) {
    const Index r = b.add_row(indexed("balance", j), inst.theta()[j]);
    vm.balance.push_back(r);
    for (Index i = 0; i < J; ++i) {
      b.add_entry(r, vm.v[i], (i == j ? 1.0 : 0.0) - rho(i, j));
      b.add_entry(r, vm.d[i], rho(i, j));
    }
  }

  if (rm) {
    bool opened = false;
    for (Index r = 0; r < rm->size(); ++r) {
      const auto& cap = rm->capacity[static_cast<std::size_t>(r)];
      if (!cap) {
        vm.resource.push_back(-1);
        continue;
      }
      if (!opened) b.open_block(ConeKind::Nonnegative), opened = true;
      const Index row = b.add_row(indexed("capacity", r), *cap);
      vm.resource.push_back(row);
      for (Index j = 0; j < J; ++j) b.add_entry(row, vm.d[j], scale * rm->phi(r, j));
    }
  }

  b.open_block(ConeKind::Nonnegative);
  for (Index j = 0; j < J; ++j) {
    const Index up = b.add_row(indexed("upper", j));
    b.add_entry(up, vm.u[j], 1.0);
    b.add_entry(up, vm.d[j], -inst.x_upper()[j]);
    const Index lo = b.add_row(indexed("lower", j));
    b.add_entry(lo, vm.d[j], inst.x_lower()[j]);
    b.add_entry(lo, vm.u[j], -1.0);
    vm.upper.push_back(up);
    vm.lower.push_back(lo);
  }

  for (Index j = 0; j < J; ++j) {
    b.open_block(ConeKind::Exponential);
    const Index r1 = b.add_row(indexed("cone", j, 1));
    const Index r2 = b.add_row(indexed("cone", j, 2));
    const Index r3 = b.add_row(indexed("cone", j, 3));
    b.add_entry(r1, vm.v[j], -1.0);
    b.add_entry(r2, vm.d[j], -1.0);
    b.add_entry(r3, vm.u[j], -inst.beta()[j]);
    b.add_entry(r3, vm.d[j], inst.alpha()[j]);
    vm.cone.push_back(r1);
  }

  if (kind == ProgramKind::RP3) {
    for (Index j = 0; j < J; ++j) {
      b.open_block(ConeKind::Exponential);
      const Index r1 = b.add_row(indexed("offer", j, 1));
      const Index r2 = b.add_row(indexed("offer", j, 2));
      const Index r3 = b.add_row(indexed("offer", j, 3));
      b.add_entry(r1, vm.d[j], -1.0);
      b.add_entry(r2, vm.v[j], -1.0);
      b.add_entry(r3, vm.v[j], -(inst.alpha()[j] - inst.beta()[j] * inst.x_upper()[j]));
      vm.offer.push_back(r1);
    }
  }

  return {std::move(b).build(), std::move(vm)};
}

}  // namespace

CompiledProgram build_sp3(const McInstance& inst) { return build_primal(inst, nullptr, ProgramKind::SP3); }

CompiledProgram build_rp2(const McInstance& inst, const ResourceModel& rm) {
  return build_primal(inst, &rm, ProgramKind::RP2);
}

CompiledProgram build_rp3(const McInstance& inst, const ResourceModel& rm) {
  return build_primal(inst, &rm, ProgramKind::RP3);
}

CompiledProgram build_dual_sd1(const McInstance& inst) {
  const Index J = inst.size();
  ProgramBuilder b(Sense::Minimize);
  VariableMap vm;
  vm.kind = ProgramKind::SD1;
  vm.products = J;

  for (Index j = 0; j < J; ++j) vm.eta.push_back(b.add_column(indexed("eta", j), inst.theta()[j]));
  for (Index j = 0; j < J; ++j) {
    vm.pi1.push_back(b.add_column(indexed("pi", j, 1)));
    vm.pi2.push_back(b.add_column(indexed("pi", j, 2)));
    vm.pi3.push_back(b.add_column(indexed("pi", j, 3)));
  }
  for (Index j = 0; j < J; ++j) vm.nu_upper.push_back(b.add_column(indexed("nu_upper", j)));
  for (Index j = 0; j < J; ++j) vm.nu_lower.push_back(b.add_column(indexed("nu_lower", j)));

  const auto& rho = inst.rho();
  b.open_block(ConeKind::Zero);
  for (Index j = 0; j < J; ++j) {
    const Index r = b.add_row(indexed("dual_v", j));
    b.add_entry(r, vm.pi1[j], 1.0);
    for (Index i = 0; i < J; ++i) b.add_entry(r, vm.eta[i], rho(j, i) - (i == j ? 1.0 : 0.0));
  }
  for (Index j = 0; j < J; ++j) {
    const Index r = b.add_row(indexed("dual_d", j), inst.psi()[j]);
    b.add_entry(r, vm.pi2[j], 1.0);
    b.add_entry(r, vm.pi3[j], -inst.alpha()[j]);
    for (Index i = 0; i < J; ++i) b.add_entry(r, vm.eta[i], -rho(j, i));
    b.add_entry(r, vm.nu_upper[j], inst.x_upper()[j]);
    b.add_entry(r, vm.nu_lower[j], -inst.x_lower()[j]);
  }
  for (Index j = 0; j < J; ++j) {
    const Index r = b.add_row(indexed("dual_u", j), -1.0);
    b.add_entry(r, vm.pi3[j], inst.beta()[j]);
    b.add_entry(r, vm.nu_lower[j], 1.0);
    b.add_entry(r, vm.nu_upper[j], -1.0);
  }

  b.open_block(ConeKind::Nonnegative);
  for (Index j = 0; j < J; ++j) b.add_entry(b.add_row(indexed("nu_upper_sign", j)), vm.nu_upper[j], -1.0);
  for (Index j = 0; j < J; ++j) b.add_entry(b.add_row(indexed("nu_lower_sign", j)), vm.nu_lower[j], -1.0);

  for (Index j = 0; j < J; ++j) {
    b.open_block(ConeKind::DualExponential);
    const Index r = b.add_row(indexed("pi_cone", j, 1));
    b.add_row(indexed("pi_cone", j, 2));
    b.add_row(indexed("pi_cone", j, 3));
    b.add_entry(r, vm.pi1[j], -1.0);
    b.add_entry(r + 1, vm.pi2[j], -1.0);
    b.add_entry(r + 2, vm.pi3[j], -1.0);
  }

  return {std::move(b).build(), std::move(vm)};
}

DualPoint strictly_feasible_dual_point(const McInstance& inst) {
  const Index J = inst.size();
  DualPoint p;
  p.pi.resize(J, 3);
  p.nu_upper = VectorXd::Zero(J);
  p.nu_lower = VectorXd::Zero(J);
  const auto& beta = inst.beta();
  const auto& alpha = inst.alpha();
  const auto& psi = inst.psi();
  for (Index j = 0; j < J; ++j) {
    p.pi(j, 0) = 1.0 + std::exp(alpha[j] - beta[j] * psi[j] - 1.0) / beta[j];
    p.pi(j, 2) = -1.0 / beta[j];
  }
  const Eigen::MatrixXd I_rho = Eigen::MatrixXd::Identity(J, J) - inst.rho();
  p.eta = I_rho.partialPivLu().solve(VectorXd(p.pi.col(0)));
  const VectorXd flow = inst.rho() * p.eta;
  for (Index j = 0; j < J; ++j) p.pi(j, 1) = psi[j] - alpha[j] / beta[j] + flow[j];
  return p;
}

DualPoint dual_point_from_sp3(const VectorXd& y, const VariableMap& vm) {
  const Index J = vm.products;
  DualPoint p;
  p.eta.resize(J);
  p.pi.resize(J, 3);
  p.nu_upper.resize(J);
  p.nu_lower.resize(J);
  for (Index j = 0; j < J; ++j) {
    p.eta[j] = y[vm.balance[static_cast<std::size_t>(j)]];
    for (int k = 0; k < 3; ++k) p.pi(j, k) = y[vm.cone[static_cast<std::size_t>(j)] + k];
    p.nu_upper[j] = y[vm.upper[static_cast<std::size_t>(j)]];
    p.nu_lower[j] = y[vm.lower[static_cast<std::size_t>(j)]];
  }
  return p;
}

VectorXd sd1_columns(const DualPoint& p, const VariableMap& vm) {
  VectorXd x = VectorXd::Zero(6 * vm.products);
  for (Index j = 0; j < vm.products; ++j) {
    const auto k = static_cast<std::size_t>(j);
    x[vm.eta[k]] = p.eta[j];
    x[vm.pi1[k]] = p.pi(j, 0);
    x[vm.pi2[k]] = p.pi(j, 1);
    x[vm.pi3[k]] = p.pi(j, 2);
    x[vm.nu_upper[k]] = p.nu_upper[j];
    x[vm.nu_lower[k]] = p.nu_lower[j];
  }
  return x;
}

double sd1_objective(const McInstance& inst, const DualPoint& p) { return inst.theta().dot(p.eta); }

double sd1_equality_residual(const McInstance& inst, const DualPoint& p) {
  const VectorXd flow = inst.rho() * p.eta;
  const VectorXd r1 = p.pi.col(0) - p.eta + flow;
  const VectorXd r2 = p.pi.col(1) - inst.alpha().cwiseProduct(p.pi.col(2)) - flow +
                      p.nu_upper.cwiseProduct(inst.x_upper()) - p.nu_lower.cwiseProduct(inst.x_lower()) -
                      inst.psi();
  const VectorXd r3 = inst.beta().cwiseProduct(p.pi.col(2)) + p.nu_lower - p.nu_upper + VectorXd::Ones(inst.size());
  return std::max({r1.lpNorm<Eigen::Infinity>(), r2.lpNorm<Eigen::Infinity>(), r3.lpNorm<Eigen::Infinity>()});
}

double sd1_min_margin(const DualPoint& p) {
  double margin = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < p.pi.rows(); ++j)
    margin = std::min(margin, dual_exp_cone_margin<double>(p.pi.row(j).transpose()));
  return margin;
}

VectorXd primal_columns(const McInstance& inst, const VariableMap& vm, const VectorXd& visits,
                        const VectorXd& intensity, const VectorXd& prices) {
  VectorXd x = VectorXd::Zero(3 * vm.products);
  for (Index j = 0; j < vm.products; ++j) {
    const auto k = static_cast<std::size_t>(j);
    const double d = intensity[j] * inst.attraction(j, prices[j]) * visits[j];
    x[vm.v[k]] = visits[j];
    x[vm.d[k]] = d;
    x[vm.u[k]] = prices[j] * d;
  }
  return x;
}

double primal_violation(const ConicProgram& program, const VectorXd& x) {
  const VectorXd s = program.b - program.A * x;
  double worst = 0.0;
  for (const auto& block : program.cones) {
    const auto seg = s.segment(block.offset, block.dim);
    switch (block.kind) {
      case ConeKind::Zero: worst = std::max(worst, seg.cwiseAbs().maxCoeff()); break;
      case ConeKind::Nonnegative: worst = std::max(worst, (-seg).maxCoeff()); break;
      case ConeKind::Exponential: worst = std::max(worst, exp_cone_distance<double>(seg)); break;
      case ConeKind::DualExponential: worst = std::max(worst, dual_exp_cone_distance<double>(seg)); break;
    }
  }
  return worst;
}

}  // namespace mcrm
