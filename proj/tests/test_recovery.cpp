#include "fixtures.hpp"
#include "mcrm/oracle.hpp"
#include "mcrm/pipeline.hpp"
#include "mcrm/recovery.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mcrm;

namespace {

// Checks every structural property of a mixture built from dec.
void check_mixture(const McInstance& inst, const ResourceModel& rm, const StaticDecision& dec,
                   const AssortmentMixture& mix) {
  const Index J = inst.size();
  REQUIRE(mix.size() >= 1);
  CHECK(mix.size() <= J + 1);
  CHECK(std::abs(mix.total_weight() - 1.0) <= 1e-9);
  for (Index k = 0; k < mix.size(); ++k) {
    const auto& c = mix.components[static_cast<std::size_t>(k)];
    CHECK(c.weight >= 0.0);
    CHECK(balance_residual(inst, c.visits, c.assortment.indicator(J), mix.x) <= 1e-10);
    if (k > 0) {
      const auto& prev = mix.components[static_cast<std::size_t>(k - 1)].assortment;
      CHECK(c.assortment.subset_of(prev));
      CHECK(c.assortment != prev);
    }
  }
  for (const auto& step : mix.trace) {
    CHECK(step.y >= 0.0);
    CHECK(step.y <= 1.0);
    CHECK(balance_residual(inst, step.v_hat, step.a_hat, mix.x) <= 1e-8);
  }
  CHECK(reconstruction_error(mix, dec) <= 1e-8);
  CHECK(std::abs(mixture_objective(inst, rm.lambda_bar, mix) - rm.lambda_bar * decision_objective(inst, 1.0, dec.x, dec.a)) <=
        1e-8);
  CHECK((mixture_usage(inst, rm, mix) - resource_usage(inst, rm, dec.a, dec.x)).lpNorm<Eigen::Infinity>() <= 1e-8);

  const StaticDecision back = aggregate_mixture(inst, rm.lambda_bar, mix);
  CHECK((back.v - dec.v).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK((back.a.cwiseProduct(back.v) - dec.a.cwiseProduct(dec.v)).lpNorm<Eigen::Infinity>() <= 1e-8);
}

StaticDecision decision_at(const McInstance& inst, const VectorXd& a, const VectorXd& x) {
  StaticDecision dec;
  dec.x = x;
  dec.a = a;
  dec.raw_a = a;
  dec.v = solve_balance(inst, a, x);
  dec.objective = decision_objective(inst, 1.0, x, a);
  return dec;
}

}  // namespace

TEST_SUITE("recovery") {
  TEST_CASE("zero sales recover the lower price and no availability") {
    const McInstance two = fixtures::two();
    const auto cp = build_sp3(two);
    PrimalDualSolution sol;
    sol.status = SolveStatus::Optimal;
    sol.x = VectorXd::Zero(cp.program.cols());
    const StaticDecision dec = recover_decision(sol, cp.map, two);
    CHECK(dec.x == two.x_lower());
    CHECK(dec.a == VectorXd::Zero(2));
    CHECK(dec.objective == 0.0);
  }

  TEST_CASE("drift outside the box is reported") {
    const McInstance one = fixtures::single();
    const auto cp = build_sp3(one);
    PrimalDualSolution sol;
    sol.status = SolveStatus::Optimal;
    sol.x = VectorXd::Zero(3);
    sol.x[cp.map.v[0]] = 1.0;
    sol.x[cp.map.d[0]] = 0.1;
    sol.x[cp.map.u[0]] = 0.1 * 10.5;  // price 10.5 > 10
    try {
      recover_decision(sol, cp.map, one);
      FAIL("expected DriftExceeded");
    } catch (const DriftExceeded& e) {
      CHECK(e.product() == 0);
      CHECK(e.drift() == doctest::Approx(0.5));
    }
  }

  TEST_CASE("single product recovers the closed-form price") {
    PipelineOptions opt;
    opt.mode = Mode::Static;
    const PipelineResult res = run_pipeline(fixtures::single(), ResourceModel::none(1), opt);
    CHECK(res.decision.x[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(res.decision.a[0] == 1.0);
    CHECK(std::abs(res.objective - std::exp(-1.0)) <= 1e-6);
  }

  TEST_CASE("unconstrained solves recover integral availability") {
    std::mt19937_64 rng(44);
    for (int t = 0; t < 40; ++t) {
      const McInstance inst = random_instance(1 + t % 4, rng);
      PipelineOptions opt;
      opt.mode = Mode::Static;
      const PipelineResult res = run_pipeline(inst, ResourceModel::none(inst.size()), opt);
      for (Index j = 0; j < inst.size(); ++j) {
        const double a = res.decision.raw_a[j];
        REQUIRE(std::min(a, 1.0 - a) <= 1e-6);
      }
      CHECK(res.mixture.size() == 1);
    }
  }

  TEST_CASE("reduction of integral and empty decisions") {
    const McInstance two = fixtures::two();
    const VectorXd x = (VectorXd(2) << 1.5, 1.0).finished();
    const auto full = dimension_reduction(decision_at(two, (VectorXd(2) << 1, 0).finished(), x), two);
    REQUIRE(full.size() == 1);
    CHECK(full.components[0].assortment == Assortment{0});
    CHECK(full.components[0].weight == 1.0);

    const auto none = dimension_reduction(decision_at(two, VectorXd::Zero(2), x), two);
    REQUIRE(none.size() == 1);
    CHECK(none.components[0].assortment.empty());
    CHECK(none.components[0].weight == 1.0);
    CHECK(none.trace.back().y == 1.0);
  }

  TEST_CASE("reduction of fractional decisions") {
    const McInstance two = fixtures::two();
    const ResourceModel rm = fixtures::two_resources();
    const PipelineResult res = run_pipeline(two, rm);
    CHECK(res.decision.a.minCoeff() < 1.0 - 1e-3);
    check_mixture(two, rm, res.decision, res.mixture);

    // Arbitrary fractional points, not only optimal ones.
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
      const McInstance inst = random_instance(1 + t % 6, rng);
      const ResourceModel r = random_resources(inst, 2, 0.5, rng, 1.7);
      VectorXd a(inst.size()), x(inst.size());
      for (Index j = 0; j < inst.size(); ++j) {
        a[j] = u(rng) < 0.2 ? 0.0 : u(rng);
        x[j] = inst.x_lower()[j] + u(rng) * (inst.x_upper()[j] - inst.x_lower()[j]);
      }
      const StaticDecision dec = decision_at(inst, a, x);
      check_mixture(inst, r, dec, dimension_reduction(dec, inst));
    }
  }

  TEST_CASE("schedules") {
    AssortmentMixture one;
    one.x = VectorXd::Ones(2);
    one.components.push_back({Assortment{0, 1}, 1.0, VectorXd::Ones(2)});
    const OfferSchedule s1 = mixture_to_schedule(one, 10.0);
    REQUIRE(s1.intervals.size() == 1);
    CHECK(s1.intervals[0].start == 0.0);
    CHECK(s1.intervals[0].end == 10.0);

    AssortmentMixture two = one;
    two.components = {{Assortment{0, 1}, 0.25, VectorXd::Ones(2)}, {Assortment{0}, 0.75, VectorXd::Ones(2)}};
    const OfferSchedule s2 = mixture_to_schedule(two, 4.0);
    REQUIRE(s2.intervals.size() == 2);
    CHECK(s2.intervals[0].end == 1.0);
    CHECK(s2.intervals[1].start == 1.0);
    CHECK(s2.intervals[1].end == 4.0);
    CHECK(s2.intervals[1].assortment == Assortment{0});
  }

  TEST_CASE("replayed schedules reproduce the mixture") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 30; ++t) {
      const McInstance inst = random_instance(1 + t % 5, rng);
      const ResourceModel rm = random_resources(inst, 1 + t % 2, 0.4, rng, 2.0);
      PipelineOptions opt;
      opt.horizon = 3.0;
      const PipelineResult res = run_pipeline(inst, rm, opt);
      CHECK(std::abs(schedule_objective(inst, rm.lambda_bar, res.schedule) - res.objective) <= 1e-9);
      CHECK((schedule_usage(inst, rm, res.schedule) - res.usage).lpNorm<Eigen::Infinity>() <= 1e-9);
      CHECK(res.schedule.intervals.back().end == 3.0);
      CHECK(within_capacity(rm, res.usage, 1e-6));
    }
  }
}
