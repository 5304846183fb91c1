#pragma once

#include "mcrm/mc_model.hpp"

namespace fixtures {

using mcrm::McInstance;
using mcrm::McParameters;
using mcrm::VectorXd;
using mcrm::MatrixXd;

inline McParameters single_params() {
  McParameters p;
  p.theta = VectorXd::Ones(1);
  p.rho = MatrixXd::Zero(1, 1);
  p.alpha = VectorXd::Zero(1);
  p.beta = VectorXd::Ones(1);
  p.psi = VectorXd::Zero(1);
  p.x_lower = VectorXd::Zero(1);
  p.x_upper = VectorXd::Constant(1, 10.0);
  return p;
}

inline McParameters two_params() {
  McParameters p;
  p.theta = (VectorXd(2) << 0.6, 0.4).finished();
  p.rho = (MatrixXd(2, 2) << 0.0, 0.3, 0.2, 0.0).finished();
  p.alpha = (VectorXd(2) << 1.0, 0.5).finished();
  p.beta = (VectorXd(2) << 1.0, 0.8).finished();
  p.psi = (VectorXd(2) << 0.2, 0.1).finished();
  p.x_lower = (VectorXd(2) << 1.0, 0.7).finished();
  p.x_upper = (VectorXd(2) << 3.0, 2.7).finished();
  return p;
}

inline McInstance single() { return mcrm::make_instance(single_params()); }
inline McInstance two() { return mcrm::make_instance(two_params()); }

// phi = [[1, 1]], capacity 0.2.
inline mcrm::ResourceModel two_resources(double lambda_bar = 1.0) {
  mcrm::ResourceModel rm;
  rm.phi = MatrixXd::Ones(1, 2);
  rm.capacity = {0.2};
  rm.lambda_bar = lambda_bar;
  return rm;
}

}  // namespace fixtures
