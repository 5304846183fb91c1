#include "mcrm/conic.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mcrm {

Index ConicProgram::column(std::string_view name) const {
  const auto it = column_lookup_.find(std::string(name));
  if (it == column_lookup_.end()) throw std::out_of_range("no column named " + std::string(name));
  return it->second;
}

void ConicProgram::check() const {
  if (b.size() != A.rows() || c.size() != A.cols()) throw std::invalid_argument("program shape mismatch");
  if (static_cast<Index>(column_names.size()) != A.cols() || static_cast<Index>(row_names.size()) != A.rows())
    throw std::invalid_argument("name tables must cover every row and column");
  if (static_cast<Index>(column_lookup_.size()) != A.cols())
    throw std::invalid_argument("column names must be unique");
  Index next = 0;
  for (const auto& block : cones) {
    if (block.offset != next) throw std::invalid_argument("cone blocks must tile the rows in order");
    const bool exp_kind = block.kind == ConeKind::Exponential || block.kind == ConeKind::DualExponential;
    if (exp_kind && block.dim != 3) throw std::invalid_argument("exponential blocks have dimension 3");
    if (block.dim <= 0) throw std::invalid_argument("empty cone block");
    next += block.dim;
  }
  if (next != A.rows()) throw std::invalid_argument("every row must belong to exactly one cone block");
}

Index ProgramBuilder::add_column(std::string name, double cost) {
  const Index idx = cols();
  if (!program_.column_lookup_.emplace(name, idx).second)
    throw std::invalid_argument("duplicate column name " + name);
  program_.column_names.push_back(std::move(name));
  costs_.push_back(cost);
  return idx;
}

void ProgramBuilder::open_block(ConeKind kind) {
  program_.cones.push_back({kind, 0, rows()});
}

Index ProgramBuilder::add_row(std::string name, double rhs) {
  if (program_.cones.empty()) throw std::logic_error("open a cone block before adding rows");
  const Index idx = rows();
  program_.row_names.push_back(std::move(name));
  rhs_.push_back(rhs);
  ++program_.cones.back().dim;
  return idx;
}

void ProgramBuilder::add_entry(Index row, Index col, double value) {
  if (value != 0.0) entries_.emplace_back(row, col, value);
}

ConicProgram ProgramBuilder::build() && {
  program_.A.resize(rows(), cols());
  program_.A.setFromTriplets(entries_.begin(), entries_.end());
  program_.A.makeCompressed();
  program_.b = Eigen::Map<const VectorXd>(rhs_.data(), rows());
  program_.c = Eigen::Map<const VectorXd>(costs_.data(), cols());
  program_.check();
  return std::move(program_);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_program_dump(std::ostream& os, const ConicProgram& p) {
  os << "mcrm-conic-program 1\n";
  os << "sense " << (p.sense == Sense::Maximize ? "maximize" : "minimize") << "\n";
  os << "size " << p.rows() << " " << p.cols() << " " << p.A.nonZeros() << "\n";
  for (Index j = 0; j < p.cols(); ++j) os << "col " << j << " " << p.column_names[static_cast<std::size_t>(j)] << "\n";
  for (Index i = 0; i < p.rows(); ++i) os << "row " << i << " " << p.row_names[static_cast<std::size_t>(i)] << "\n";
  for (Index j = 0; j < p.cols(); ++j)
    if (p.c[j] != 0.0) os << "obj " << j << " " << num(p.c[j]) << "\n";
  for (Index i = 0; i < p.rows(); ++i)
    if (p.b[i] != 0.0) os << "rhs " << i << " " << num(p.b[i]) << "\n";
  for (Index i = 0; i < p.A.outerSize(); ++i)
    for (SparseMatrixXd::InnerIterator it(p.A, i); it; ++it)
      os << "a " << it.row() << " " << it.col() << " " << num(it.value()) << "\n";
  for (const auto& block : p.cones)
    os << "cone " << to_string(block.kind) << " " << block.offset << " " << block.dim << "\n";
  os << "end\n";
}

std::string program_dump(const ConicProgram& program) {
  std::ostringstream os;
  write_program_dump(os, program);
  return os.str();
}

}  // namespace mcrm
