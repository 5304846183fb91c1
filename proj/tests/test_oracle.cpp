#include "fixtures.hpp"
#include "mcrm/conic.hpp"
#include "mcrm/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mcrm;

TEST_SUITE("oracle") {
  TEST_CASE("single-product optimum") {
    const OracleOptimum best = enumerate_assortment_optimum(fixtures::single(), ResourceModel::none(1));
    CHECK(best.objective == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK(best.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(best.assortment == Assortment{0});
  }

  TEST_CASE("nonpositive margins make the empty assortment optimal") {
    auto p = fixtures::two_params();
    p.psi = p.x_upper.array() + 0.5;
    const OracleOptimum best = enumerate_assortment_optimum(make_instance(p), ResourceModel::none(2));
    CHECK(best.objective == 0.0);
    CHECK(best.assortment.empty());
  }

  TEST_CASE("profit evaluator agrees with the model") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
      const Index J = 1 + t % 6;
      const McInstance inst = random_instance(J, rng);
      const ProfitEvaluator eval(inst);
      VectorXd x(J);
      for (Index j = 0; j < J; ++j) x[j] = inst.x_lower()[j] + u(rng) * (inst.x_upper()[j] - inst.x_lower()[j]);
      const std::uint64_t mask = rng() % (std::uint64_t{1} << J);
      const Assortment A = Assortment::from_mask(mask, J);
      CHECK(std::abs(eval.profit(mask, x) - expected_profit(inst, ResourceModel::none(J), A, x)) <= 1e-12);
    }
  }

  TEST_CASE("Lipschitz bound dominates finite-difference gradients") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 60; ++t) {
      const Index J = 1 + t % 4;
      const McInstance inst = random_instance(J, rng);
      const ProfitEvaluator eval(inst);
      const double L = lipschitz_bound(inst, 1.0);
      for (int k = 0; k < 20; ++k) {
        VectorXd x(J);
        for (Index j = 0; j < J; ++j)
          x[j] = inst.x_lower()[j] + (1e-6 + u(rng) * (1 - 2e-6)) * (inst.x_upper()[j] - inst.x_lower()[j]);
        const std::uint64_t mask = rng() % (std::uint64_t{1} << J);
        double l1 = 0.0;
        for (Index j = 0; j < J; ++j) {
          VectorXd a = x, b = x;
          a[j] -= 1e-7;
          b[j] += 1e-7;
          l1 += std::abs(eval.profit(mask, b) - eval.profit(mask, a)) / 2e-7;
        }
        REQUIRE(l1 <= L * (1 + 1e-6));
      }
    }
  }

  TEST_CASE("generators produce valid instances") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 200; ++t) {
      const McInstance inst = random_instance(1 + t % 8, rng);
      CHECK(validate_instance(inst.params()).report.ok());
      const McInstance moved = perturb_instance(inst, rng);
      CHECK(validate_instance(moved.params()).report.ok());
      const ResourceModel rm = random_resources(inst, 1 + t % 3, 0.5, rng);
      CHECK(validate_resources(rm, inst.size()).ok());
    }
  }

  TEST_CASE("sandwich with a binding resource") {
    const McInstance two = fixtures::two();
    const ResourceModel rm = fixtures::two_resources();
    const PipelineResult res = run_pipeline(two, rm);
    const CheckReport rep = check_oracle_sandwich(two, rm, res);
    CHECK_MESSAGE(rep.passed, rep.detail);
    const OracleOptimum oracle = enumerate_assortment_optimum(two, rm);
    CHECK(oracle.objective >= res.objective - 1e-4);
    CHECK(oracle.objective <= res.objective + oracle.lipschitz * oracle.grid_step + 1e-4);
  }

  TEST_CASE("integrality on random unconstrained instances") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 20; ++t) {
      const McInstance inst = random_instance(1 + t % 4, rng);
      const CheckReport rep = check_integrality_no_resources(inst, 1);
      CHECK_MESSAGE(rep.passed, rep.detail);
    }
  }

  TEST_CASE("a dominant product is offered") {
    auto p = fixtures::two_params();
    p.alpha[0] = p.beta[0] * p.x_lower[0];  // buys for sure at its lower price
    p.psi[0] = 0.0;
    const McInstance inst = make_instance(p);
    PipelineOptions opt;
    opt.mode = Mode::Static;
    const PipelineResult res = run_pipeline(inst, ResourceModel::none(2), opt);
    CHECK(res.decision.a[0] == 1.0);
    CHECK(enumerate_assortment_optimum(inst, ResourceModel::none(2)).assortment.contains(0));
  }

  TEST_CASE("an unreachable product may go either way") {
    auto p = fixtures::two_params();
    p.theta << 1.0, 0.0;
    p.rho.setZero();
    const McInstance inst = make_instance(p);
    PipelineOptions opt;
    opt.mode = Mode::Static;
    const PipelineResult res = run_pipeline(inst, ResourceModel::none(2), opt);
    const double a = res.decision.a[1];
    CHECK((a == 0.0 || a == 1.0));
    CHECK(res.decision.a[0] == 1.0);
  }

  TEST_CASE("constant-price dominance on the fixtures") {
    const McInstance two = fixtures::two();
    for (const ResourceModel& rm : {fixtures::two_resources(), ResourceModel::none(2)}) {
      const PipelineResult res = run_pipeline(two, rm);
      const CheckReport rep = verify_constant_price_dominance(two, rm, res);
      CHECK_MESSAGE(rep.passed, rep.detail);
      CHECK(rep.trials >= 501);
    }
  }

  TEST_CASE("the two-price split never beats one price") {
    // Binding capacity with prices inside the box.
    const McInstance two = fixtures::two();
    ResourceModel rm = fixtures::two_resources();
    rm.capacity = {0.35};
    const PipelineResult res = run_pipeline(two, rm);
    OracleSettings s;
    s.schedule_samples = 50;
    const CheckReport rep = verify_constant_price_dominance(two, rm, res, s);
    CHECK_MESSAGE(rep.passed, rep.detail);
    CHECK(rep.detail.find(" 0 two-price") == std::string::npos);
  }

  TEST_CASE("special cases") {
    const McInstance two = fixtures::two();
    const CheckReport rep = check_special_cases(two, ResourceModel::none(2));
    CHECK_MESSAGE(rep.passed, rep.detail);

    // Fixed prices: four assortments to choose from.
    const VectorXd target = (two.x_lower() + two.x_upper()) / 2;
    PipelineOptions opt;
    opt.mode = Mode::FixedPrice;
    const PipelineResult fixed = run_pipeline(two, ResourceModel::none(2), opt);
    double best = 0.0;
    for (std::uint64_t m = 0; m < 4; ++m)
      best = std::max(best, expected_profit(two, ResourceModel::none(2), Assortment::from_mask(m, 2), target));
    CHECK(std::abs(fixed.objective - best) <= 1e-6);
    CHECK(fixed.decision.x == target);

    // Pricing only, one product: x = clamp(psi + 1 / beta).
    auto p = fixtures::single_params();
    p.psi[0] = 0.3;
    p.beta[0] = 2.0;
    p.x_lower[0] = 0.0;
    p.x_upper[0] = 0.6;
    const McInstance one = make_instance(p);
    opt.mode = Mode::PricingOnly;
    const PipelineResult priced = run_pipeline(one, ResourceModel::none(1), opt);
    CHECK(priced.decision.a[0] == 1.0);
    CHECK(priced.decision.x[0] == doctest::Approx(0.6).epsilon(1e-6));

    // With pinned prices pricing-only and fixed-price coincide.
    const McInstance pinned = pin_prices(two, target);
    opt.mode = Mode::PricingOnly;
    const PipelineResult a = run_pipeline(pinned, ResourceModel::none(2), opt);
    opt.mode = Mode::FixedPrice;
    opt.target_prices = target;
    const PipelineResult b = run_pipeline(pinned, ResourceModel::none(2), opt);
    CHECK(std::abs(a.objective - b.objective) <= 1e-6);
  }

  TEST_CASE("Monte Carlo frequencies") {
    std::mt19937_64 rng(31);
    const McInstance inst = random_instance(3, rng);
    VectorXd x = (inst.x_lower() + inst.x_upper()) / 2;
    CHECK(monte_carlo_z_score(inst, VectorXd::Ones(3), x, 1'000'000, 4) <= 3.0);
    // Some customers leave without buying.
    const VectorXd freq = simulate_choices(inst, VectorXd::Ones(3), x, 200'000, 5);
    CHECK(freq.sum() <= 1.0);
    CHECK((freq - choice_probabilities(inst, VectorXd::Ones(3), x)).lpNorm<Eigen::Infinity>() <= 0.01);
  }

  TEST_CASE("mixture LP by enumeration matches the conic solver") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
      const Index J = 1 + t % 3;
      const McInstance inst = random_instance(J, rng);
      const ResourceModel rm = random_resources(inst, 1 + t % 2, 0.5, rng);
      VectorXd x(J);
      for (Index j = 0; j < J; ++j) x[j] = inst.x_lower()[j] + u(rng) * (inst.x_upper()[j] - inst.x_lower()[j]);
      const MixtureLp exact = best_mixture_at_prices(inst, rm, x);
      REQUIRE(exact.feasible);

      const ProfitEvaluator eval(inst);
      const std::uint64_t count = std::uint64_t{1} << J;
      ProgramBuilder b(Sense::Maximize);
      std::vector<VectorXd> use(count);
      for (std::uint64_t m = 0; m < count; ++m) {
        const VectorXd s = eval.sales(m, x);
        use[m] = rm.lambda_bar * (rm.phi * s);
        b.add_column("w" + std::to_string(m), rm.lambda_bar * (x - inst.psi()).dot(s));
      }
      b.open_block(ConeKind::Zero);
      const Index total = b.add_row("total", 1.0);
      for (std::uint64_t m = 0; m < count; ++m) b.add_entry(total, static_cast<Index>(m), 1.0);
      b.open_block(ConeKind::Nonnegative);
      for (Index r = 0; r < rm.size(); ++r) {
        if (!rm.capacity[static_cast<std::size_t>(r)]) continue;
        const Index row = b.add_row("cap" + std::to_string(r), *rm.capacity[static_cast<std::size_t>(r)]);
        for (std::uint64_t m = 0; m < count; ++m) b.add_entry(row, static_cast<Index>(m), use[m][r]);
      }
      for (std::uint64_t m = 0; m < count; ++m) b.add_entry(b.add_row("s" + std::to_string(m)), static_cast<Index>(m), -1.0);
      const auto sol = solve(std::move(b).build());
      REQUIRE(sol.optimal());
      CHECK(std::abs(exact.objective - sol.primal_objective) <= 1e-6);

      double weight = 0.0, value = 0.0;
      VectorXd used = VectorXd::Zero(rm.size());
      for (const auto& c : exact.mixture) {
        weight += c.weight;
        value += c.weight * expected_profit(inst, rm, c.assortment, x);
        used += c.weight * resource_usage(inst, rm, c.assortment, x);
      }
      CHECK(std::abs(weight - 1.0) <= 1e-9);
      CHECK(std::abs(value - exact.objective) <= 1e-9);
      CHECK(within_capacity(rm, used, 1e-9));
    }
  }
}
