#include "fixtures.hpp"
#include "mcrm/mc_model.hpp"
#include "mcrm/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <unordered_set>

using namespace mcrm;

namespace {

VectorXd random_prices(const McInstance& inst, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd x(inst.size());
  for (Index j = 0; j < inst.size(); ++j) x[j] = inst.x_lower()[j] + u(rng) * (inst.x_upper()[j] - inst.x_lower()[j]);
  return x;
}

Assortment random_assortment(Index J, std::mt19937_64& rng) {
  return Assortment::from_mask(rng() & ((std::uint64_t{1} << J) - 1), J);
}

}  // namespace

TEST_SUITE("mc_model") {
  TEST_CASE("validation examples") {
    CHECK(validate_instance(fixtures::single_params()).report.ok());
    CHECK(validate_instance(fixtures::two_params()).report.ok());

    auto p = fixtures::single_params();
    p.rho(0, 0) = 1.0;
    const auto out = validate_instance(p);
    CHECK_FALSE(out.instance);
    CHECK(out.report.has("neumann divergence"));
  }

  TEST_CASE("validation names each violated rule") {
    auto p = fixtures::two_params();
    p.theta[0] = 0.5;
    CHECK(validate_instance(p).report.has("theta normalization"));

    p = fixtures::two_params();
    p.theta[0] += 5e-10;  // within tolerance, renormalized
    const auto out = validate_instance(p);
    REQUIRE(out.instance);
    CHECK(out.instance->theta().sum() == doctest::Approx(1.0).epsilon(1e-15));

    p = fixtures::two_params();
    p.beta[1] = 0.0;
    CHECK(validate_instance(p).report.has("beta positive"));

    p = fixtures::two_params();
    p.x_lower[0] = 4.0;
    const auto bad = validate_instance(p).report;
    CHECK(bad.has("price bounds"));

    p = fixtures::two_params();
    p.alpha[1] = 1.0;  // Q above one at the lower bound
    CHECK(validate_instance(p).report.has("q range"));

    p = fixtures::two_params();
    p.rho(0, 1) = -0.1;
    CHECK(validate_instance(p).report.has("rho nonnegative"));

    p = fixtures::two_params();
    p.rho(0, 1) = 1.2;
    CHECK(validate_instance(p).report.has("rho row sum"));

    p = fixtures::two_params();
    p.psi[0] = std::nan("");
    CHECK(validate_instance(p).report.has("finite"));

    p = fixtures::two_params();
    p.alpha.resize(3);
    CHECK(validate_instance(p).report.has("dimension"));
    CHECK_THROWS_AS(make_instance(p), std::invalid_argument);
  }

  TEST_CASE("balance examples") {
    const McInstance two = fixtures::two();
    const VectorXd x = two.x_lower();
    const VectorXd v = solve_balance(two, Assortment{}, x);
    CHECK(v[0] == doctest::Approx(0.723404).epsilon(1e-6));
    CHECK(v[1] == doctest::Approx(0.617021).epsilon(1e-6));

    auto p = fixtures::two_params();
    p.rho.setZero();
    const McInstance flat = make_instance(p);
    CHECK((solve_balance(flat, Assortment{0}, x) - flat.theta()).norm() == 0.0);

    // Q_j = 1 at the lower bounds empties rho'.
    p = fixtures::two_params();
    p.alpha[1] = p.beta[1] * p.x_lower[1];
    const McInstance sure = make_instance(p);
    CHECK((solve_balance(sure, Assortment::full(2), sure.x_lower()) - sure.theta()).norm() <= 1e-15);
  }

  TEST_CASE("choice probability, profit and usage examples") {
    const McInstance one = fixtures::single();
    const VectorXd x1 = VectorXd::Ones(1);
    CHECK(choice_probabilities(one, Assortment{}, x1).norm() == 0.0);
    CHECK(choice_probabilities(one, Assortment{0}, x1)[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    ResourceModel rm;
    rm.phi = MatrixXd::Identity(1, 1);
    rm.capacity = {std::nullopt};
    rm.lambda_bar = 2.0;
    CHECK(expected_profit(one, rm, Assortment{}, x1) == 0.0);
    CHECK(expected_profit(one, rm, Assortment{0}, x1) == doctest::Approx(2.0 * std::exp(-1.0)));
    CHECK(resource_usage(one, rm, Assortment{}, x1).norm() == 0.0);
    CHECK(resource_usage(one, rm, Assortment{0}, x1)[0] == doctest::Approx(2.0 * std::exp(-1.0)));
    CHECK(within_capacity(rm, VectorXd::Constant(1, 1e300)));

    const McInstance two = fixtures::two();
    const ResourceModel none = ResourceModel::none(2);
    CHECK(expected_profit(two, none, Assortment::full(2), two.psi().cwiseMax(two.x_lower())) >= 0.0);
    auto p = fixtures::two_params();
    p.psi = p.x_lower;
    const McInstance zero_margin = make_instance(p);
    for (std::uint64_t m = 0; m < 4; ++m)
      CHECK(expected_profit(zero_margin, none, Assortment::from_mask(m, 2), p.x_lower) == 0.0);
  }

  TEST_CASE("Monte Carlo agrees with the analytic probabilities") {
    const McInstance two = fixtures::two();
    const VectorXd x = (VectorXd(2) << 1.0, 0.7).finished();
    CHECK(monte_carlo_z_score(two, VectorXd::Ones(2), x, 1'000'000, 3) <= 3.0);
  }

  TEST_CASE("balance solves are exact and agree with fixed-point iteration") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 300; ++t) {
      const Index J = 1 + t % 8;
      const McInstance inst = random_instance(J, rng);
      const VectorXd x = random_prices(inst, rng);
      VectorXd a(J);
      for (Index j = 0; j < J; ++j) a[j] = t % 2 ? u(rng) : std::round(u(rng));
      const VectorXd v = solve_balance(inst, a, x);
      REQUIRE(balance_residual(inst, v, a, x) <= 1e-10);
      REQUIRE(v.minCoeff() >= -1e-12);

      // v <- theta + rho'^T v
      const VectorXd q = inst.attractions(x);
      MatrixXd rho_p = inst.rho();
      for (Index i = 0; i < J; ++i) rho_p.row(i) *= 1.0 - a[i] * q[i];
      VectorXd w = inst.theta();
      for (int it = 0; it < 100000; ++it) {
        const VectorXd next = inst.theta() + rho_p.transpose() * w;
        const double step = (next - w).lpNorm<Eigen::Infinity>();
        w = next;
        if (step < 1e-15) break;
      }
      REQUIRE((w - v).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
  }

  TEST_CASE("demand is nonincreasing in own price") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
      const Index J = 1 + t % 5;
      const McInstance inst = random_instance(J, rng);
      const Assortment A = random_assortment(J, rng);
      VectorXd x = random_prices(inst, rng);
      for (Index j = 0; j < J; ++j) {
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 10; ++k) {
          x[j] = inst.x_lower()[j] + k / 10.0 * (inst.x_upper()[j] - inst.x_lower()[j]);
          const double P = choice_probabilities(inst, A, x)[j];
          REQUIRE(P <= prev + 1e-12);
          prev = P;
        }
      }
    }
  }

  TEST_CASE("assortments are canonical map keys") {
    const Assortment a{2, 0, 2};
    CHECK(a.members() == std::vector<Index>{0, 2});
    CHECK(a == Assortment::from_mask(0b101, 3));
    CHECK(Assortment{0} < Assortment{1});
    CHECK(Assortment{0}.subset_of(a));
    CHECK_FALSE(a.subset_of(Assortment{0}));
    std::unordered_set<Assortment> seen{a, Assortment{0, 2}, Assortment{}};
    CHECK(seen.size() == 2);
    CHECK(Assortment::support((VectorXd(3) << 0.5, 1e-10, 2.0).finished(), 1e-9) == a);
    CHECK(a.indicator(3) == (VectorXd(3) << 1, 0, 1).finished());
  }

  TEST_CASE("resource validation") {
    ResourceModel rm = fixtures::two_resources();
    CHECK(validate_resources(rm, 2).ok());
    rm.capacity = {-1.0};
    CHECK(validate_resources(rm, 2).has("capacity nonnegative"));
    rm = fixtures::two_resources(0.0);
    CHECK(validate_resources(rm, 2).has("lambda_bar positive"));
    rm = fixtures::two_resources();
    CHECK(validate_resources(rm, 3).has("dimension"));
  }
}
