#include "mcrm/conic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace mcrm {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterLimit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

VectorXd min_form_cost(const ConicProgram& p) { return p.sense == Sense::Maximize ? VectorXd(-p.c) : p.c; }

}  // namespace

Residuals evaluate_residuals(const ConicProgram& p, const VectorXd& x, const VectorXd& y, const VectorXd& s) {
  const VectorXd c = min_form_cost(p);
  const VectorXd ax = p.A * x;
  const VectorXd aty = p.A.transpose() * y;
  Residuals r;
  r.primal = inf_norm(ax + s - p.b) / (1.0 + std::max({inf_norm(ax), inf_norm(s), inf_norm(p.b)}));
  r.dual = inf_norm(aty + c) / (1.0 + std::max(inf_norm(aty), inf_norm(c)));
  const double pobj = c.dot(x), dobj = -p.b.dot(y);
  r.gap = std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
  return r;
}

struct ConicSolver::Impl {
  const ConicProgram& program;
  SolverSettings settings;
  Index n = 0, m = 0, N = 0;

  // Equilibrated data: A_hat = D A E, b_hat = sigma_b D b, c_hat = sigma_c E c.
  SparseMatrixXd A_hat;
  VectorXd b_hat, c_hat, D, E;
  double sigma_b = 1.0, sigma_c = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> kkt;

  Impl(const ConicProgram& p, SolverSettings s) : program(p), settings(s) {
    program.check();
    n = program.cols();
    m = program.rows();
    N = n + m + 1;
    equilibrate();
    factor();
  }

  void equilibrate() {
    A_hat = program.A;
    D = VectorXd::Ones(m);
    E = VectorXd::Ones(n);
    b_hat = program.b;
    c_hat = min_form_cost(program);
    if (settings.scaling) {
      for (int pass = 0; pass < 25; ++pass) {
        VectorXd row_norm = VectorXd::Zero(m), col_norm = VectorXd::Zero(n);
        for (Index i = 0; i < A_hat.outerSize(); ++i)
          for (SparseMatrixXd::InnerIterator it(A_hat, i); it; ++it) {
            const double a = std::abs(it.value());
            row_norm[it.row()] = std::max(row_norm[it.row()], a);
            col_norm[it.col()] = std::max(col_norm[it.col()], a);
          }
        // Exponential blocks need a uniform scale or the cone is not preserved.
        for (const auto& block : program.cones)
          if (block.kind == ConeKind::Exponential || block.kind == ConeKind::DualExponential)
            row_norm.segment(block.offset, 3).setConstant(row_norm.segment(block.offset, 3).maxCoeff());
        VectorXd dr(m), ec(n);
        for (Index i = 0; i < m; ++i) dr[i] = row_norm[i] > 0 ? std::clamp(1.0 / std::sqrt(row_norm[i]), 1e-4, 1e4) : 1.0;
        for (Index j = 0; j < n; ++j) ec[j] = col_norm[j] > 0 ? std::clamp(1.0 / std::sqrt(col_norm[j]), 1e-4, 1e4) : 1.0;
        A_hat = dr.asDiagonal() * A_hat * ec.asDiagonal();
        D = D.cwiseProduct(dr);
        E = E.cwiseProduct(ec);
        if ((dr.array() - 1.0).abs().maxCoeff() < 1e-3 && (ec.array() - 1.0).abs().maxCoeff() < 1e-3) break;
      }
      b_hat = D.cwiseProduct(program.b);
      c_hat = E.cwiseProduct(min_form_cost(program));
      const double mean_row = m > 0 ? Eigen::MatrixXd(A_hat).rowwise().norm().mean() : 1.0;
      const double mean_col = n > 0 ? Eigen::MatrixXd(A_hat).colwise().norm().mean() : 1.0;
      sigma_b = mean_col / std::max(b_hat.norm(), 1e-4);
      sigma_c = mean_row / std::max(c_hat.norm(), 1e-4);
      b_hat *= sigma_b;
      c_hat *= sigma_c;
    }
  }

  void factor() {
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(N, N);
    const Eigen::MatrixXd Ad(A_hat);
    M.block(0, n, n, m) = Ad.transpose();
    M.block(n, 0, m, n) = -Ad;
    M.block(0, n + m, n, 1) = c_hat;
    M.block(n, n + m, m, 1) = b_hat;
    M.block(n + m, 0, 1, n) = -c_hat.transpose();
    M.block(n + m, n, 1, m) = -b_hat.transpose();
    kkt.compute(M);
  }

  void project(VectorXd& u) const {
    auto y = u.segment(n, m);
    for (const auto& block : program.cones) project_onto_dual_block(y, block);
    u[N - 1] = std::max(u[N - 1], 0.0);
  }

  // Recovers unscaled (x, y, s) from a normalized iterate.
  void unscale(const VectorXd& u, const VectorXd& v, double tau, PrimalDualSolution& out) const {
    out.x = E.cwiseProduct(u.head(n)) / (tau * sigma_b);
    out.y = D.cwiseProduct(u.segment(n, m)) / (tau * sigma_c);
    out.s = v.segment(n, m).cwiseQuotient(D) / (tau * sigma_b);
  }

  void fill_objectives(PrimalDualSolution& out) const {
    out.primal_objective = program.c.dot(out.x);
    const double dual_min = -program.b.dot(out.y);
    out.dual_objective = program.sense == Sense::Maximize ? -dual_min : dual_min;
  }

  // Certificate tests on the raw iterate; returns true when one is found.
  bool certificate(const VectorXd& u, const VectorXd& v, double tol, PrimalDualSolution& out) const {
    const VectorXd c = min_form_cost(program);
    const VectorXd y = D.cwiseProduct(u.segment(n, m));
    const double by = program.b.dot(y);
    if (by < 0) {
      const VectorXd yc = y / -by;
      if (inf_norm(program.A.transpose() * yc) <= tol) {
        out.status = SolveStatus::Infeasible;
        out.x = VectorXd::Zero(n);
        out.y = yc;
        out.s = VectorXd::Zero(m);
        return true;
      }
    }
    const VectorXd x = E.cwiseProduct(u.head(n));
    const VectorXd s = v.segment(n, m).cwiseQuotient(D);
    const double cx = c.dot(x);
    if (cx < 0) {
      const VectorXd xc = x / -cx, sc = s / -cx;
      if (inf_norm(program.A * xc + sc) <= tol) {
        out.status = SolveStatus::Unbounded;
        out.x = xc;
        out.y = VectorXd::Zero(m);
        out.s = sc;
        return true;
      }
    }
    return false;
  }

  // One Douglas-Rachford pass in the w form:
  //   u~ = (I + Q)^{-1} w,  u = P(2 u~ - w),  w+ = w + alpha (u - u~),
  // with v = u - (2 u~ - w) the matching dual cone point.
  struct Pass {
    VectorXd u, v, next;
  };

  Pass pass(const VectorXd& w) const {
    Pass p;
    const VectorXd ut = kkt.solve(w);
    const VectorXd point = 2.0 * ut - w;
    p.u = point;
    project(p.u);
    p.v = p.u - point;
    p.next = w + settings.relaxation * (p.u - ut);
    return p;
  }

  PrimalDualSolution run() {
    const double tol = settings.tolerance;
    VectorXd w = VectorXd::Zero(N);
    w[N - 1] = 1.0;

    // Anderson acceleration (type II) on w. Each step also evaluates the plain
    // iterate and keeps whichever has the smaller fixed-point residual; losing
    // to the plain step clears the memory.
    const int mem = std::max(settings.acceleration_memory, 0);
    std::deque<VectorXd> dw, dg;
    VectorXd w_prev, g_prev;

    PrimalDualSolution best;
    double best_score = std::numeric_limits<double>::infinity();
    PrimalDualSolution cur;

    // Acceleration can stall next to a non-solution on nearly degenerate
    // programs; without progress for a while the memory is dropped and plain
    // steps run for a stretch.
    constexpr int stall_window = 100, plain_stretch = 200;
    double best_fp = std::numeric_limits<double>::infinity();
    int since_progress = 0, plain_left = 0;

    Pass cur_pass = pass(w);
    int it = 0;
    for (; it < settings.max_iterations; ++it) {
      const VectorXd g = cur_pass.next - w;
      VectorXd w_new = cur_pass.next;
      Pass new_pass;
      bool have_pass = false;

      const double fp = g.norm() / std::max(w.norm(), 1e-300);
      if (fp < 0.99 * best_fp) {
        best_fp = fp;
        since_progress = 0;
      } else if (++since_progress >= stall_window && plain_left == 0) {
        plain_left = plain_stretch;
        since_progress = 0;
        best_fp = fp;
        dw.clear();
        dg.clear();
        g_prev.resize(0);
      }

      if (plain_left > 0) {
        --plain_left;
      } else if (mem > 0) {
        if (g_prev.size()) {
          dw.push_back(w - w_prev);
          dg.push_back(g - g_prev);
          if (static_cast<int>(dw.size()) > mem) {
            dw.pop_front();
            dg.pop_front();
          }
        }
        w_prev = w;
        g_prev = g;
        if (!dg.empty()) {
          const Index k = static_cast<Index>(dg.size());
          Eigen::MatrixXd G(N, k), W(N, k);
          for (Index c = 0; c < k; ++c) {
            G.col(c) = dg[static_cast<std::size_t>(c)];
            W.col(c) = dw[static_cast<std::size_t>(c)];
          }
          const Eigen::MatrixXd GtG = G.transpose() * G;
          const double reg = 1e-10 * GtG.trace() + 1e-300;
          const VectorXd gamma =
              (GtG + reg * Eigen::MatrixXd::Identity(k, k)).ldlt().solve(G.transpose() * g);
          const VectorXd w_aa = cur_pass.next - (W + G) * gamma;
          bool accelerated = false;
          if (w_aa.allFinite()) {
            Pass trial = pass(w_aa);
            Pass plain = pass(cur_pass.next);
            // The map is positively homogeneous, so residuals are compared
            // relative to the point; otherwise the search drifts toward w = 0.
            if ((trial.next - w_aa).norm() / w_aa.norm() <=
                (plain.next - cur_pass.next).norm() / cur_pass.next.norm()) {
              w_new = w_aa;
              new_pass = std::move(trial);
              accelerated = true;
            } else {
              new_pass = std::move(plain);
            }
            have_pass = true;
          }
          if (!accelerated) {
            dw.clear();
            dg.clear();
            g_prev.resize(0);
          }
        }
      }
      w = w_new;
      cur_pass = have_pass ? std::move(new_pass) : pass(w);
      if (mem > 0) {
        const double scale = w.norm();
        if (scale > 0 && std::isfinite(scale)) {
          w /= scale;
          cur_pass.u /= scale;
          cur_pass.v /= scale;
          cur_pass.next /= scale;
        }
      }

      const bool last = it + 1 == settings.max_iterations;
      if ((it + 1) % std::max(settings.check_interval, 1) != 0 && !last) continue;

      const VectorXd& u = cur_pass.u;
      const VectorXd& v = cur_pass.v;
      const double tau = u[N - 1], kappa = v[N - 1];
      if (tau > 1e-12 * std::max(1.0, kappa)) {
        unscale(u, v, tau, cur);
        const Residuals r = evaluate_residuals(program, cur.x, cur.y, cur.s);
        cur.primal_residual = r.primal;
        cur.dual_residual = r.dual;
        cur.duality_gap = r.gap;
        cur.iterations = it + 1;
        const double score = std::max({r.primal, r.dual, r.gap});
        if (score < best_score) {
          best_score = score;
          best = cur;
        }
        // Convergence on the very last allowed iteration is reported as a limit.
        if (score <= tol && !last) {
          cur.status = SolveStatus::Optimal;
          fill_objectives(cur);
          return cur;
        }
      }
      if (tau <= kappa && certificate(u, v, tol, cur)) {
        cur.iterations = it + 1;
        return cur;
      }
    }

    if (!std::isfinite(best_score)) {
      best.x = VectorXd::Zero(n);
      best.y = VectorXd::Zero(m);
      best.s = VectorXd::Zero(m);
      best.primal_residual = best.dual_residual = best.duality_gap = std::numeric_limits<double>::infinity();
    }
    best.status = SolveStatus::IterLimit;
    best.iterations = it;
    fill_objectives(best);
    return best;
  }
};

ConicSolver::ConicSolver(const ConicProgram& program, SolverSettings settings)
    : impl_(new Impl(program, settings)) {}

ConicSolver::~ConicSolver() = default;

PrimalDualSolution ConicSolver::solve() { return impl_->run(); }

PrimalDualSolution solve(const ConicProgram& program, const SolverSettings& settings) {
  if (!(settings.tolerance > 0)) throw std::invalid_argument("solver tolerance must be positive");
  ConicSolver solver(program, settings);
  return solver.solve();
}

}  // namespace mcrm
