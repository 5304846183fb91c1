#pragma once

#include "mcrm/conic.hpp"
#include "mcrm/mc_model.hpp"
#include "mcrm/recovery.hpp"
#include "mcrm/reformulate.hpp"

#include <optional>
#include <stdexcept>
#include <string_view>

namespace mcrm {

enum class Mode {
  Network,      // RP2 with the instance's resources
  Static,       // SP3, resources ignored, objective scaled by lambda_bar
  PricingOnly,  // RP3
  FixedPrice,   // RP2 with both price bounds pinned to a target
};

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

/// The conic solve ended without an optimal status.
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const PrimalDualSolution& sol);
  SolveStatus status() const { return status_; }

 private:
  SolveStatus status_;
};

struct PipelineOptions {
  Mode mode = Mode::Network;
  SolverSettings solver;
  RecoveryOptions recovery;
  ReductionOptions reduction;
  double horizon = 1.0;
  /// Fixed-price targets; the box midpoint when absent.
  std::optional<VectorXd> target_prices;
  /// Times the solve is repeated at a 100x tighter tolerance, stopping at
  /// 1e-12, after a drift failure or, without capacity rows, when a recovered
  /// availability is farther than a tenth of the snap band from 0 and 1.
  int drift_retries = 2;
};

struct PipelineResult {
  Mode mode = Mode::Network;
  /// The instance actually compiled; differs from the input only in fixed-price mode.
  McInstance instance;
  CompiledProgram compiled;
  PrimalDualSolution solution;
  StaticDecision decision;
  AssortmentMixture mixture;
  OfferSchedule schedule;
  /// Revenue rate of the mixture, scaled by lambda_bar in every mode.
  double objective = 0.0;
  VectorXd usage;
  double tolerance_used = 0.0;
  double elapsed_seconds = 0.0;
};

/// Instance with both price bounds equal to target.
McInstance pin_prices(const McInstance& inst, const VectorXd& target);

PipelineResult run_pipeline(const McInstance& inst, const ResourceModel& rm, const PipelineOptions& options = {});

}  // namespace mcrm
