#pragma once

#include "mcrm/cones.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mcrm {

using Eigen::Index;
using Eigen::VectorXd;
using SparseMatrixXd = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Sense { Minimize, Maximize };

/// Affine-plus-cone standard form
///
///   optimize  c^T x   subject to   A x + s = b,  s in K,
///
/// where K is the product of the cone blocks laid over consecutive rows of s.
/// Zero-cone rows are equalities, nonnegative rows are A x <= b.
struct ConicProgram {
  Sense sense = Sense::Maximize;
  SparseMatrixXd A;
  VectorXd b;
  VectorXd c;
  std::vector<ConeBlock> cones;
  std::vector<std::string> column_names;
  std::vector<std::string> row_names;

  Index rows() const { return A.rows(); }
  Index cols() const { return A.cols(); }

  /// Column index for a name; throws std::out_of_range when absent.
  Index column(std::string_view name) const;
  double objective(const VectorXd& x) const { return c.dot(x); }

  /// Throws std::invalid_argument when shapes, cone coverage, or names are
  /// inconsistent.
  void check() const;

 private:
  friend class ProgramBuilder;
  std::unordered_map<std::string, Index> column_lookup_;
};

/// Incremental construction of a ConicProgram. Rows are appended to the most
/// recently opened cone block.
class ProgramBuilder {
 public:
  explicit ProgramBuilder(Sense sense) { program_.sense = sense; }

  Index add_column(std::string name, double cost = 0.0);
  void set_cost(Index col, double cost) { costs_.at(static_cast<std::size_t>(col)) = cost; }

  void open_block(ConeKind kind);
  Index add_row(std::string name, double rhs = 0.0);
  void add_entry(Index row, Index col, double value);

  Index rows() const { return static_cast<Index>(rhs_.size()); }
  Index cols() const { return static_cast<Index>(costs_.size()); }

  ConicProgram build() &&;

 private:
  ConicProgram program_;
  std::vector<double> costs_;
  std::vector<double> rhs_;
  std::vector<Eigen::Triplet<double>> entries_;
};

/// Deterministic text serialization: header, sense, names, objective and
/// right-hand side nonzeros, row-major triplets, and the cone block list.
/// Numbers are printed with 17 significant digits.
void write_program_dump(std::ostream& os, const ConicProgram& program);
std::string program_dump(const ConicProgram& program);

struct SolverSettings {
  double tolerance = 1e-8;
  int max_iterations = 200000;
  bool scaling = true;
  std::uint64_t seed = 0;
  /// Over-relaxation factor of the splitting iteration.
  double relaxation = 1.5;
  /// Residuals are evaluated every check_interval iterations.
  int check_interval = 5;
  /// Anderson acceleration memory; 0 disables it.
  int acceleration_memory = 8;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterLimit };

std::string_view to_string(SolveStatus status);

struct PrimalDualSolution {
  SolveStatus status = SolveStatus::IterLimit;
  VectorXd x;
  VectorXd y;
  VectorXd s;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  /// |primal - dual| / (1 + max(|primal|, |dual|)).
  double duality_gap = 0.0;
  int iterations = 0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Relative residuals of a candidate (x, y, s) for the program, using the same
/// normalization the solver applies at termination.
struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

Residuals evaluate_residuals(const ConicProgram& program, const VectorXd& x, const VectorXd& y,
                             const VectorXd& s);

/// Operator-splitting solver on the homogeneous self-dual embedding: each
/// iteration solves one fixed linear system and projects onto the cones.
class ConicSolver {
 public:
  ConicSolver(const ConicProgram& program, SolverSettings settings = {});
  ~ConicSolver();
  ConicSolver(const ConicSolver&) = delete;
  ConicSolver& operator=(const ConicSolver&) = delete;

  PrimalDualSolution solve();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PrimalDualSolution solve(const ConicProgram& program, const SolverSettings& settings = {});

}  // namespace mcrm
