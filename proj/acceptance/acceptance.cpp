// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "mcrm/cones.hpp"
#include "mcrm/io.hpp"
#include "mcrm/oracle.hpp"
#include "mcrm/pipeline.hpp"
#include "mcrm/recovery.hpp"
#include "mcrm/reformulate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

using namespace mcrm;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
};

// Fails the outcome once, keeping the first reason.
void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.summary = why;
  o.pass = false;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string data(const std::string& name) { return std::string(MCRM_DATA_DIR) + "/" + name; }

PipelineResult static_solve(const McInstance& inst) {
  PipelineOptions opt;
  opt.mode = Mode::Static;
  return run_pipeline(inst, ResourceModel::none(inst.size()), opt);
}

// Mixture sizes of every R=0 pipeline run, for the constant-assortment check.
std::vector<Index> unconstrained_sizes;

struct ConstrainedRun {
  McInstance inst;
  ResourceModel rm;
  PipelineResult res;
};
std::vector<ConstrainedRun> constrained_runs;

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(1001);
  double worst = -1e300;
  for (int t = 0; t < 50; ++t) {
    const McInstance inst = random_instance(1 + t % 3, rng);
    const PipelineResult res = static_solve(inst);
    unconstrained_sizes.push_back(res.mixture.size());
    const OracleOptimum best = enumerate_assortment_optimum(inst, ResourceModel::none(inst.size()));
    const double gap = std::abs(res.objective - best.objective);
    const double allowed = best.lipschitz * best.grid_step + 1e-4;
    worst = std::max(worst, gap - allowed);
    if (gap > allowed) fail(o, "instance " + std::to_string(t) + ": gap " + fmt(gap) + " > " + fmt(allowed));
  }
  if (o.pass) o.summary = "50 instances, worst gap minus allowance " + fmt(worst);
  return o;
}

Outcome integrality() {
  Outcome o;
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const McInstance inst = random_instance(1 + t % 6, rng);
    const PipelineResult res = static_solve(inst);
    unconstrained_sizes.push_back(res.mixture.size());
    for (Index j = 0; j < inst.size(); ++j) {
      const double a = res.decision.raw_a[j];
      worst = std::max(worst, std::min(std::abs(a), std::abs(1.0 - a)));
    }
  }
  if (worst > 1e-6) fail(o, "availability " + fmt(worst) + " away from {0,1}");
  else o.summary = "100/100 integral, worst distance " + fmt(worst);
  return o;
}

Outcome strong_duality() {
  Outcome o;
  std::mt19937_64 rng(1003);
  double worst_rel = 0.0, worst_margin = 1e300, worst_viol = 0.0;
  for (int t = 0; t < 50; ++t) {
    const McInstance inst = random_instance(1 + t % 6, rng);
    const auto sp = build_sp3(inst);
    const auto sd = build_dual_sd1(inst);
    const auto a = solve(sp.program), b = solve(sd.program);
    if (!a.optimal() || !b.optimal()) {
      fail(o, "instance " + std::to_string(t) + " not solved");
      continue;
    }
    const double rel = std::abs(a.primal_objective - b.primal_objective) / std::max(1.0, std::abs(a.primal_objective));
    worst_rel = std::max(worst_rel, rel);
    const DualPoint q = strictly_feasible_dual_point(inst);
    worst_margin = std::min(worst_margin, sd1_min_margin(q));
    worst_viol = std::max({worst_viol, primal_violation(sd.program, sd1_columns(q, sd.map)), sd1_equality_residual(inst, q)});
  }
  if (worst_rel > 1e-6) fail(o, "relative objective gap " + fmt(worst_rel));
  if (worst_margin < 1.0 - 1e-9) fail(o, "interior margin " + fmt(worst_margin));
  if (worst_viol > 1e-9) fail(o, "dual point violation " + fmt(worst_viol));
  if (o.pass)
    o.summary = "50 instances, gap " + fmt(worst_rel) + ", margin " + fmt(worst_margin) + ", violation " + fmt(worst_viol);
  return o;
}

Outcome reduction() {
  Outcome o;
  std::mt19937_64 rng(1004);
  double worst_rec = 0.0;
  Index largest = 0;
  for (int t = 0; t < 100; ++t) {
    const McInstance inst = random_instance(1 + t % 6, rng);
    const ResourceModel rm = random_resources(inst, 1 + t % 3, 0.5, rng);
    ConstrainedRun run{inst, rm, run_pipeline(inst, rm)};
    const AssortmentMixture& mix = run.res.mixture;
    const Index J = inst.size();
    const std::string tag = "instance " + std::to_string(t) + ": ";
    if (mix.size() < 1 || mix.size() > J + 1) fail(o, tag + std::to_string(mix.size()) + " components");
    largest = std::max(largest, mix.size());
    if (std::abs(mix.total_weight() - 1.0) > 1e-9) fail(o, tag + "weights sum to " + fmt(mix.total_weight()));
    for (Index k = 0; k < mix.size(); ++k) {
      const auto& c = mix.components[static_cast<std::size_t>(k)];
      if (c.weight < 0.0) fail(o, tag + "negative weight");
      if (k > 0) {
        const auto& prev = mix.components[static_cast<std::size_t>(k - 1)].assortment;
        if (!c.assortment.subset_of(prev) || c.assortment == prev) fail(o, tag + "supports not nested");
      }
    }
    for (const auto& step : mix.trace)
      if (step.y < 0.0 || step.y > 1.0) fail(o, tag + "step size " + fmt(step.y));
    const double rec = reconstruction_error(mix, run.res.decision);
    worst_rec = std::max(worst_rec, rec);
    if (rec > 1e-8) fail(o, tag + "reconstruction error " + fmt(rec));
    constrained_runs.push_back(std::move(run));
  }
  if (o.pass)
    o.summary = "100 solves, largest K " + std::to_string(largest) + ", reconstruction error " + fmt(worst_rec);
  return o;
}

Outcome transfer() {
  Outcome o;
  double worst = 0.0;
  for (const auto& run : constrained_runs) {
    const double mix = mixture_objective(run.inst, run.rm.lambda_bar, run.res.mixture);
    const double dec =
        run.rm.lambda_bar * decision_objective(run.inst, 1.0, run.res.decision.x, run.res.decision.a);
    worst = std::max(worst, std::abs(mix - dec));
  }
  if (constrained_runs.size() != 100) fail(o, "expected the 100 runs of criterion 4");
  if (worst > 1e-8) fail(o, "objective gap " + fmt(worst));
  if (o.pass) o.summary = std::to_string(constrained_runs.size()) + " runs, worst gap " + fmt(worst);
  return o;
}

Outcome dominance() {
  Outcome o;
  const InstanceFile capped = read_instance_file(data("two_product.json"));
  const InstanceFile open = read_instance_file(data("two_product_unconstrained.json"));
  // Same products with a capacity that binds at interior prices.
  ResourceModel interior = capped.resources;
  interior.capacity = {0.35};
  const McInstance two = make_instance(capped.params);
  const std::vector<std::pair<std::string, ResourceModel>> cases = {
      {"capacity 0.2", capped.resources}, {"no resources", open.resources}, {"capacity 0.35", interior}};

  OracleSettings s;
  s.schedule_samples = 500;
  int splits = 0;
  double worst = -1e300;
  std::ostringstream os;
  for (const auto& [name, rm] : cases) {
    const PipelineResult ref = run_pipeline(two, rm);
    const CheckReport rep = verify_constant_price_dominance(two, rm, ref, s);
    worst = std::max(worst, rep.worst_margin);
    if (!rep.passed) fail(o, name + ": " + rep.detail);
    std::smatch m;
    if (std::regex_search(rep.detail, m, std::regex("(\\d+) two-price"))) splits += std::stoi(m[1]);
    if (std::regex_search(rep.detail, m, std::regex("(\\d+) feasible schedules")) && std::stoi(m[1]) < 500)
      fail(o, name + ": only " + m[1].str() + " feasible schedules");
  }
  if (splits == 0) fail(o, "no two-price split was constructed");
  if (o.pass)
    o.summary = "3 fixtures x 500 schedules, " + std::to_string(splits) + " two-price splits, worst excess " + fmt(worst);
  return o;
}

Outcome constant_assortment() {
  Outcome o;
  for (Index k : unconstrained_sizes)
    if (k != 1) fail(o, "an R=0 run has " + std::to_string(k) + " components");
  if (unconstrained_sizes.empty()) fail(o, "no R=0 runs recorded");
  if (o.pass) o.summary = std::to_string(unconstrained_sizes.size()) + " R=0 runs, all K=1";
  return o;
}

Outcome special_cases() {
  Outcome o;
  std::mt19937_64 rng(1008);
  int runs = 0;
  for (Index J = 1; J <= 4; ++J) {
    for (int t = 0; t < 3; ++t) {
      const McInstance inst = random_instance(J, rng);
      for (const ResourceModel& rm : {ResourceModel::none(J), random_resources(inst, 1, 0.7, rng)}) {
        const CheckReport rep = check_special_cases(inst, rm);
        ++runs;
        if (!rep.passed) fail(o, "J=" + std::to_string(J) + ": " + rep.detail);
      }
    }
  }
  if (o.pass) o.summary = std::to_string(runs) + " instances with J <= 4, with and without a resource";
  return o;
}

Outcome cone_geometry() {
  Outcome o;
  using V3 = Vector3<double>;
  std::mt19937_64 rng(1009);
  std::normal_distribution<double> n(0.0, 2.0);
  auto point = [&] { return V3(n(rng), n(rng), n(rng)); };
  double orth = 0.0, rec = 0.0, idem = 0.0;
  int disagree = 0;
  const double tol = 1e-6;
  for (int k = 0; k < 10000; ++k) {
    const V3 p = point();
    const V3 a = project_exp_cone(p);
    const V3 b = -project_dual_exp_cone<double>(-p);
    orth = std::max(orth, std::abs(a.dot(b)));
    rec = std::max(rec, (a + b - p).norm());
    const V3 d = project_dual_exp_cone(p);
    idem = std::max({idem, (project_exp_cone(a) - a).norm(), (project_dual_exp_cone(d) - d).norm()});

    const V3 q = k % 2 ? V3(project_exp_cone(point()) + 1e-6 * point()) : point();
    if (exp_cone_contains(q, tol) != ((q - project_exp_cone(q)).norm() <= tol)) ++disagree;
    if (dual_exp_cone_contains(q, tol) != ((q - project_dual_exp_cone(q)).norm() <= tol)) ++disagree;
  }
  if (orth > 1e-9 || rec > 1e-9) fail(o, "Moreau orthogonality " + fmt(orth) + ", reconstruction " + fmt(rec));
  if (idem > 1e-10) fail(o, "idempotence " + fmt(idem));
  if (disagree) fail(o, std::to_string(disagree) + " membership disagreements");
  if (o.pass)
    o.summary = "10^4 samples, orthogonality " + fmt(orth) + ", reconstruction " + fmt(rec) + ", idempotence " + fmt(idem);
  return o;
}

Outcome balance() {
  Outcome o;
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Index J = 1 + t % 8;
    const McInstance inst = random_instance(J, rng);
    VectorXd a(J), x(J);
    for (Index j = 0; j < J; ++j) {
      a[j] = t % 2 ? u(rng) : std::round(u(rng));
      x[j] = inst.x_lower()[j] + u(rng) * (inst.x_upper()[j] - inst.x_lower()[j]);
    }
    worst = std::max(worst, balance_residual(inst, solve_balance(inst, a, x), a, x));
  }
  if (worst > 1e-10) fail(o, "balance residual " + fmt(worst));

  std::mt19937_64 gen(1011);
  const McInstance fixtures[] = {make_instance(read_instance_file(data("single_product.json")).params),
                                 make_instance(read_instance_file(data("two_product.json")).params),
                                 random_instance(3, gen)};
  double z = 0.0;
  std::uint64_t seed = 1;
  for (const McInstance& inst : fixtures) {
    const VectorXd x = (inst.x_lower() + inst.x_upper()) / 2;
    z = std::max(z, monte_carlo_z_score(inst, VectorXd::Ones(inst.size()), x, 1'000'000, seed++));
  }
  if (z > 3.0) fail(o, "Monte Carlo z " + fmt(z));
  if (o.pass) o.summary = "10^3 triples, residual " + fmt(worst) + "; 3 fixtures, largest z " + fmt(z);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle equivalence without resources", oracle_equivalence},
      {"integral availability without resources", integrality},
      {"strong duality and interior dual point", strong_duality},
      {"dimension reduction invariants", reduction},
      {"mixture objective transfer", transfer},
      {"constant-price dominance", dominance},
      {"constant assortment without resources", constant_assortment},
      {"special cases", special_cases},
      {"cone geometry", cone_geometry},
      {"balance consistency", balance},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failed;
    std::printf("criterion %2zu %s  %s: %s (%.1fs)\n", i + 1, out.pass ? "PASS" : "FAIL", criteria[i].first,
                out.summary.c_str(), secs);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
