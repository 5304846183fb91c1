#include "mcrm/oracle.hpp"

#include "mcrm/reformulate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <queue>
#include <sstream>

namespace mcrm {

double OracleSettings::step_for(Index products) const {
  if (grid_step > 0) return grid_step;
  if (products <= 2) return 1e-3;
  return products == 3 ? 1e-2 : 5e-2;
}

void CheckReport::record(double margin, double allowed) {
  ++trials;
  worst_margin = std::max(worst_margin, margin - allowed);
  if (margin > allowed) {
    ++failures;
    passed = false;
  }
}

namespace {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, ProfitEvaluator::max_products,
                                  ProfitEvaluator::max_products>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, ProfitEvaluator::max_products, 1>;

std::uint64_t mask_of(const Assortment& a) {
  std::uint64_t m = 0;
  for (Index j : a.members()) m |= std::uint64_t{1} << j;
  return m;
}

Assortment assortment_of(std::uint64_t mask, Index J) { return Assortment::from_mask(mask, J); }

std::vector<Index> bits(std::uint64_t mask, Index J) {
  std::vector<Index> out;
  for (Index j = 0; j < J; ++j)
    if (mask >> j & 1) out.push_back(j);
  return out;
}

bool has_capacity(const ResourceModel& rm) {
  for (const auto& c : rm.capacity)
    if (c) return true;
  return false;
}

// Points of [lo, hi] at spacing step, endpoints included.
std::vector<double> axis(double lo, double hi, double step) {
  std::vector<double> pts;
  if (hi <= lo) return {lo};
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= n; ++k) pts.push_back(lo + static_cast<double>(k) * step);
  if (hi - pts.back() > 1e-12) pts.push_back(hi);
  return pts;
}

// Objective of a candidate price vector; -inf when infeasible.
using Objective = std::function<double(const VectorXd&)>;

// Keeps the k best scored points seen.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}
  void offer(double score, const VectorXd& x) {
    if (!std::isfinite(score)) return;
    if (heap_.size() < k_) {
      heap_.push({score, x});
    } else if (score > heap_.top().first) {
      heap_.pop();
      heap_.push({score, x});
    }
  }
  std::vector<std::pair<double, VectorXd>> sorted() {
    std::vector<std::pair<double, VectorXd>> out;
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Cmp {
    bool operator()(const std::pair<double, VectorXd>& a, const std::pair<double, VectorXd>& b) const {
      return a.first > b.first;
    }
  };
  std::size_t k_;
  std::priority_queue<std::pair<double, VectorXd>, std::vector<std::pair<double, VectorXd>>, Cmp> heap_;
};

// Mixed-radix sweep over the product of per-coordinate axes. Coordinates not
// in dims stay at base.
template <typename F>
void sweep(const std::vector<Index>& dims, const std::vector<std::vector<double>>& axes, VectorXd base, F&& visit) {
  std::vector<std::size_t> idx(dims.size(), 0);
  for (std::size_t k = 0; k < dims.size(); ++k) base[dims[k]] = axes[k][0];
  while (true) {
    visit(base);
    std::size_t k = 0;
    for (; k < dims.size(); ++k) {
      if (++idx[k] < axes[k].size()) {
        base[dims[k]] = axes[k][idx[k]];
        break;
      }
      idx[k] = 0;
      base[dims[k]] = axes[k][0];
    }
    if (k == dims.size()) return;
  }
}

// Coordinate ascent with step halving, clamped to the box.
std::pair<double, VectorXd> ascend(const Objective& f, VectorXd x, const std::vector<Index>& dims,
                                   const VectorXd& lo, const VectorXd& hi, double step) {
  double best = f(x);
  while (step > 1e-10) {
    bool moved = false;
    for (Index j : dims) {
      for (double dir : {1.0, -1.0}) {
        VectorXd y = x;
        y[j] = std::clamp(x[j] + dir * step, lo[j], hi[j]);
        if (y[j] == x[j]) continue;
        const double val = f(y);
        if (val > best) {
          best = val;
          x = y;
          moved = true;
          break;
        }
      }
    }
    if (!moved) step /= 2;
  }
  return {best, x};
}

// Grid search plus refinement over the coordinates in dims.
struct SearchResult {
  double value = -std::numeric_limits<double>::infinity();
  VectorXd x;
  bool moved_far = false;
};

SearchResult grid_and_refine(const Objective& f, const std::vector<Index>& dims,
                             const std::vector<std::vector<double>>& axes, const VectorXd& lo, const VectorXd& hi,
                             double cell, int starts) {
  SearchResult out;
  TopK top(static_cast<std::size_t>(std::max(starts, 1)));
  sweep(dims, axes, lo, [&](const VectorXd& x) { top.offer(f(x), x); });
  auto seeds = top.sorted();
  if (seeds.empty()) return out;
  const VectorXd grid_best = seeds.front().second;
  out.value = seeds.front().first;
  out.x = grid_best;
  for (const auto& [score, x0] : seeds) {
    auto [val, x] = ascend(f, x0, dims, lo, hi, cell);
    if (val > out.value) {
      out.value = val;
      out.x = x;
    }
  }
  for (Index j : dims)
    if (std::abs(out.x[j] - grid_best[j]) > cell * (1 + 1e-9)) out.moved_far = true;
  return out;
}


// max c.w  s.t.  sum w = 1,  U w <= cap,  w >= 0, by enumerating basic
// solutions: a support S and |S| - 1 tight capacity rows. Empty when the
// enumeration would be too large.
struct ExactLp {
  double objective = -std::numeric_limits<double>::infinity();
  VectorXd w;
};

double choose(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 0; i < k; ++i) r = r * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return r;
}

void combinations(std::size_t n, std::size_t k, const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  if (k > n) return;
  for (;;) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

std::optional<ExactLp> exact_simplex_lp(const VectorXd& c, const MatrixXd& U, const VectorXd& cap) {
  const std::size_t n = static_cast<std::size_t>(c.size()), R = static_cast<std::size_t>(cap.size());
  double work = 0.0;
  for (std::size_t k = 1; k <= std::min(n, R + 1); ++k) work += choose(n, k) * choose(R, k - 1);
  if (work > 2e5) return std::nullopt;

  ExactLp best;
  constexpr double feas = 1e-12;
  for (std::size_t k = 1; k <= std::min(n, R + 1); ++k) {
    combinations(n, k, [&](const std::vector<std::size_t>& S) {
      combinations(R, k - 1, [&](const std::vector<std::size_t>& T) {
        Eigen::MatrixXd M(k, k);
        VectorXd rhs(k);
        for (std::size_t j = 0; j < k; ++j) M(0, j) = 1.0;
        rhs[0] = 1.0;
        for (std::size_t i = 0; i < T.size(); ++i) {
          for (std::size_t j = 0; j < k; ++j) M(i + 1, j) = U(T[i], S[j]);
          rhs[i + 1] = cap[T[i]];
        }
        const auto lu = M.fullPivLu();
        if (!lu.isInvertible()) return;
        const VectorXd ws = lu.solve(rhs);
        if (ws.minCoeff() < -feas) return;
        VectorXd w = VectorXd::Zero(n);
        for (std::size_t j = 0; j < k; ++j) w[S[j]] = std::max(ws[j], 0.0);
        if (((U * w - cap).array() > feas * (1.0 + cap.array().abs())).any()) return;
        const double value = c.dot(w);
        if (value > best.objective) {
          best.objective = value;
          best.w = w;
        }
      });
    });
  }
  return best;
}

}  // namespace

ProfitEvaluator::ProfitEvaluator(const McInstance& inst) : inst_(inst), J_(inst.size()) {
  if (J_ > max_products) throw std::invalid_argument("oracle evaluator supports at most 12 products");
}

VectorXd ProfitEvaluator::sales(std::uint64_t mask, const VectorXd& x) const {
  SmallMatrix M(J_, J_);
  SmallVector q(J_);
  const auto& rho = inst_.rho();
  for (Index i = 0; i < J_; ++i) q[i] = (mask >> i & 1) ? inst_.attraction(i, x[i]) : 0.0;
  // Row j of (I - rho^T diag(1 - q)).
  for (Index j = 0; j < J_; ++j)
    for (Index i = 0; i < J_; ++i) M(j, i) = (i == j ? 1.0 : 0.0) - rho(i, j) * (1.0 - q[i]);
  const SmallVector v = M.partialPivLu().solve(SmallVector(inst_.theta()));
  VectorXd out(J_);
  for (Index j = 0; j < J_; ++j) out[j] = q[j] * v[j];
  return out;
}

double ProfitEvaluator::profit(std::uint64_t mask, const VectorXd& x) const {
  const VectorXd s = sales(mask, x);
  double total = 0.0;
  for (Index j = 0; j < J_; ++j) total += (x[j] - inst_.psi()[j]) * s[j];
  return total;
}

double lipschitz_bound(const McInstance& inst, double lambda_bar) {
  double M = 0.0;
  for (Index k = 0; k < inst.size(); ++k)
    M = std::max({M, std::abs(inst.x_upper()[k] - inst.psi()[k]), std::abs(inst.x_lower()[k] - inst.psi()[k])});
  double L = 0.0;
  for (Index j = 0; j < inst.size(); ++j)
    L += (1.0 + 2.0 * inst.beta()[j] * M) * inst.attraction(j, inst.x_lower()[j]) * inst.max_visits()[j];
  return lambda_bar * L;
}

MixtureLp best_mixture_at_prices(const McInstance& inst, const ResourceModel& rm, const VectorXd& x) {
  const Index J = inst.size();
  const ProfitEvaluator eval(inst);
  const std::uint64_t count = std::uint64_t{1} << J;
  MixtureLp out;

  std::vector<double> revenue(count);
  std::vector<VectorXd> usage(count);
  for (std::uint64_t m = 0; m < count; ++m) {
    const VectorXd s = eval.sales(m, x);
    revenue[m] = rm.lambda_bar * ((x - inst.psi()).dot(s));
    usage[m] = rm.lambda_bar * (rm.phi * s);
  }

  if (!has_capacity(rm)) {
    std::uint64_t best = 0;
    for (std::uint64_t m = 1; m < count; ++m)
      if (revenue[m] > revenue[best]) best = m;
    out.objective = revenue[best];
    out.mixture = {{assortment_of(best, J), 1.0}};
    return out;
  }

  {
    std::vector<Index> rows;
    for (Index r = 0; r < rm.size(); ++r)
      if (rm.capacity[static_cast<std::size_t>(r)]) rows.push_back(r);
    VectorXd c(static_cast<Index>(count)), cap(static_cast<Index>(rows.size()));
    MatrixXd U(static_cast<Index>(rows.size()), static_cast<Index>(count));
    for (std::size_t i = 0; i < rows.size(); ++i) cap[static_cast<Index>(i)] = *rm.capacity[static_cast<std::size_t>(rows[i])];
    for (std::uint64_t m = 0; m < count; ++m) {
      c[static_cast<Index>(m)] = revenue[m];
      for (std::size_t i = 0; i < rows.size(); ++i) U(static_cast<Index>(i), static_cast<Index>(m)) = usage[m][rows[i]];
    }
    if (const auto lp = exact_simplex_lp(c, U, cap)) {
      if (!std::isfinite(lp->objective)) {
        out.feasible = false;
        out.objective = lp->objective;
        return out;
      }
      out.objective = lp->objective;
      for (std::uint64_t m = 0; m < count; ++m)
        if (lp->w[static_cast<Index>(m)] > 0.0) out.mixture.push_back({assortment_of(m, J), lp->w[static_cast<Index>(m)]});
      return out;
    }
  }

  // Too many bases to enumerate: hand the LP to the conic solver.
  ProgramBuilder b(Sense::Maximize);
  for (std::uint64_t m = 0; m < count; ++m) b.add_column("w[" + std::to_string(m) + "]", revenue[m]);
  b.open_block(ConeKind::Zero);
  const Index total = b.add_row("total", 1.0);
  for (std::uint64_t m = 0; m < count; ++m) b.add_entry(total, static_cast<Index>(m), 1.0);
  b.open_block(ConeKind::Nonnegative);
  for (Index r = 0; r < rm.size(); ++r) {
    const auto& cap = rm.capacity[static_cast<std::size_t>(r)];
    if (!cap) continue;
    const Index row = b.add_row("capacity[" + std::to_string(r) + "]", *cap);
    for (std::uint64_t m = 0; m < count; ++m) b.add_entry(row, static_cast<Index>(m), usage[m][r]);
  }
  for (std::uint64_t m = 0; m < count; ++m)
    b.add_entry(b.add_row("sign[" + std::to_string(m) + "]"), static_cast<Index>(m), -1.0);
  const ConicProgram lp = std::move(b).build();

  SolverSettings settings;
  settings.tolerance = 1e-10;
  const PrimalDualSolution sol = solve(lp, settings);
  if (sol.status == SolveStatus::Infeasible) {
    out.feasible = false;
    out.objective = -std::numeric_limits<double>::infinity();
    return out;
  }
  if (!sol.optimal()) throw SolverFailure(sol);
  out.objective = sol.primal_objective;
  for (std::uint64_t m = 0; m < count; ++m)
    if (sol.x[static_cast<Index>(m)] > 1e-9) out.mixture.push_back({assortment_of(m, J), sol.x[static_cast<Index>(m)]});
  return out;
}

OracleOptimum best_prices_for_assortment(const McInstance& inst, const ResourceModel& rm, const Assortment& offered,
                                         const OracleSettings& settings) {
  const Index J = inst.size();
  const ProfitEvaluator eval(inst);
  const std::uint64_t mask = mask_of(offered);
  const double h = settings.step_for(J);
  const bool capped = has_capacity(rm);

  const Objective f = [&](const VectorXd& x) {
    const VectorXd s = eval.sales(mask, x);
    if (capped) {
      const VectorXd use = rm.lambda_bar * (rm.phi * s);
      if (!within_capacity(rm, use, 0.0)) return -std::numeric_limits<double>::infinity();
    }
    return rm.lambda_bar * (x - inst.psi()).dot(s);
  };

  OracleOptimum out;
  out.grid_step = h;
  out.lipschitz = lipschitz_bound(inst, rm.lambda_bar);
  out.assortment = offered;
  out.x = inst.x_lower();
  const std::vector<Index> dims = offered.members();
  if (dims.empty()) {
    out.objective = f(out.x);
    out.mixture = {{offered, 1.0}};
    return out;
  }
  std::vector<std::vector<double>> axes;
  for (Index j : dims) axes.push_back(axis(inst.x_lower()[j], inst.x_upper()[j], h));
  const auto res = grid_and_refine(f, dims, axes, inst.x_lower(), inst.x_upper(), h, settings.multistarts);
  out.objective = res.value;
  out.x = res.x.size() ? res.x : out.x;
  out.grid_too_coarse = res.moved_far;
  out.mixture = {{offered, 1.0}};
  return out;
}

OracleOptimum enumerate_assortment_optimum(const McInstance& inst, const ResourceModel& rm,
                                           const OracleSettings& settings) {
  const Index J = inst.size();
  if (J > 3) throw std::invalid_argument("grid oracle is limited to three products");
  OracleOptimum best;
  best.grid_step = settings.step_for(J);
  best.lipschitz = lipschitz_bound(inst, rm.lambda_bar);
  best.x = inst.x_lower();
  best.mixture = {{Assortment{}, 1.0}};

  if (!has_capacity(rm)) {
    for (std::uint64_t m = 1; m < (std::uint64_t{1} << J); ++m) {
      const OracleOptimum cand = best_prices_for_assortment(inst, rm, assortment_of(m, J), settings);
      best.grid_too_coarse = best.grid_too_coarse || cand.grid_too_coarse;
      if (cand.objective > best.objective) {
        best.objective = cand.objective;
        best.assortment = cand.assortment;
        best.x = cand.x;
        best.mixture = cand.mixture;
      }
    }
    return best;
  }

  // With resources each price vector needs a linear program, so the sweep is
  // coarse and the refinement does the fine work.
  const int points = J == 1 ? 0 : (J == 2 ? 41 : 17);
  std::vector<Index> dims;
  std::vector<std::vector<double>> axes;
  double cell = best.grid_step;
  for (Index j = 0; j < J; ++j) {
    dims.push_back(j);
    const double lo = inst.x_lower()[j], hi = inst.x_upper()[j];
    const double step = points ? std::max((hi - lo) / (points - 1), best.grid_step) : best.grid_step;
    cell = std::max(cell, step);
    axes.push_back(axis(lo, hi, step));
  }
  const Objective f = [&](const VectorXd& x) { return best_mixture_at_prices(inst, rm, x).objective; };
  const auto res = grid_and_refine(f, dims, axes, inst.x_lower(), inst.x_upper(), cell, settings.multistarts);
  best.grid_too_coarse = res.moved_far;
  if (res.value > best.objective) {
    const MixtureLp lp = best_mixture_at_prices(inst, rm, res.x);
    best.objective = lp.objective;
    best.x = res.x;
    best.mixture = lp.mixture;
    if (lp.mixture.size() == 1) best.assortment = lp.mixture.front().assortment;
  }
  return best;
}

McInstance random_instance(Index J, std::mt19937_64& rng, const RandomInstanceOptions& o) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, o.alpha_noise);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  McParameters p;
  p.theta.resize(J);
  for (Index j = 0; j < J; ++j) p.theta[j] = gamma(rng);
  p.theta /= p.theta.sum();

  p.rho = MatrixXd::Zero(J, J);
  for (Index i = 0; i < J && J > 1; ++i) {
    double total = 0.0;
    for (Index j = 0; j < J; ++j)
      if (j != i) total += p.rho(i, j) = gamma(rng);
    p.rho.row(i) *= uniform(0.0, o.rho_row_max) / total;
  }

  p.beta.resize(J);
  p.alpha.resize(J);
  p.psi.resize(J);
  p.x_lower.resize(J);
  p.x_upper.resize(J);
  for (Index j = 0; j < J; ++j) {
    p.beta[j] = uniform(o.beta_min, o.beta_max);
    p.x_lower[j] = uniform(o.x_lower_min, o.x_lower_max);
    p.x_upper[j] = p.x_lower[j] + uniform(o.width_min, o.width_max);
    p.alpha[j] = p.beta[j] * p.x_lower[j] - std::abs(normal(rng));
    p.psi[j] = uniform(0.0, p.x_upper[j]);
  }
  return make_instance(std::move(p));
}

ResourceModel random_resources(const McInstance& inst, Index R, double tightness, std::mt19937_64& rng,
                               double lambda_bar) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ResourceModel rm;
  rm.lambda_bar = lambda_bar;
  rm.phi = MatrixXd::Zero(R, inst.size());
  for (Index r = 0; r < R; ++r)
    for (Index j = 0; j < inst.size(); ++j) rm.phi(r, j) = unit(rng) < 0.8 ? 0.2 + unit(rng) : 0.0;
  const VectorXd use = resource_usage(inst, rm, Assortment::full(inst.size()), inst.x_lower());
  for (Index r = 0; r < R; ++r) rm.capacity.emplace_back(tightness * use[r]);
  return rm;
}

McInstance perturb_instance(const McInstance& inst, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> noise(-scale, scale);
  McParameters p = inst.params();
  for (Index j = 0; j < inst.size(); ++j) {
    p.beta[j] *= 1.0 + noise(rng);
    p.alpha[j] = std::min(p.alpha[j] + noise(rng), p.beta[j] * p.x_lower[j]);
    p.psi[j] = std::max(0.0, p.psi[j] * (1.0 + noise(rng)));
  }
  return make_instance(std::move(p));
}

VectorXd simulate_choices(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices,
                          std::int64_t customers, std::uint64_t seed) {
  const Index J = inst.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<Index> arrival(inst.theta().data(), inst.theta().data() + J);
  std::vector<std::vector<double>> cumulative(static_cast<std::size_t>(J));
  for (Index i = 0; i < J; ++i) {
    double c = 0.0;
    for (Index j = 0; j < J; ++j) cumulative[static_cast<std::size_t>(i)].push_back(c += inst.rho()(i, j));
  }
  VectorXd buy(J);
  for (Index j = 0; j < J; ++j) buy[j] = intensity[j] * inst.attraction(j, prices[j]);

  VectorXd counts = VectorXd::Zero(J);
  for (std::int64_t n = 0; n < customers; ++n) {
    Index at = arrival(rng);
    while (true) {
      if (unit(rng) < buy[at]) {
        counts[at] += 1.0;
        break;
      }
      const auto& row = cumulative[static_cast<std::size_t>(at)];
      const double r = unit(rng);
      const auto next = std::upper_bound(row.begin(), row.end(), r) - row.begin();
      if (next >= J) break;
      at = next;
    }
  }
  return counts / static_cast<double>(customers);
}

double monte_carlo_z_score(const McInstance& inst, const VectorXd& intensity, const VectorXd& prices,
                           std::int64_t customers, std::uint64_t seed) {
  const VectorXd freq = simulate_choices(inst, intensity, prices, customers, seed);
  const VectorXd P = choice_probabilities(inst, intensity, prices);
  double worst = 0.0;
  for (Index j = 0; j < inst.size(); ++j) {
    const double sigma = std::sqrt(P[j] * (1.0 - P[j]) / static_cast<double>(customers));
    const double gap = std::abs(freq[j] - P[j]);
    if (sigma > 0) worst = std::max(worst, gap / sigma);
    else if (gap > 0) worst = std::numeric_limits<double>::infinity();
  }
  return worst;
}

CheckReport check_integrality_no_resources(const McInstance& inst, int trials, const OracleSettings& settings,
                                           const SolverSettings& solver) {
  CheckReport rep;
  rep.name = "integrality";
  std::mt19937_64 rng(settings.seed);
  PipelineOptions opt;
  opt.mode = Mode::Static;
  opt.solver = solver;
  const ResourceModel none = ResourceModel::none(inst.size());
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const McInstance trial = t == 0 ? inst : perturb_instance(inst, rng);
    double margin = 0.0;
    try {
      const PipelineResult res = run_pipeline(trial, none, opt);
      for (Index j = 0; j < trial.size(); ++j)
        margin = std::max(margin, std::min(std::abs(res.decision.raw_a[j]), std::abs(1.0 - res.decision.raw_a[j])));
    } catch (const std::exception& e) {
      margin = std::numeric_limits<double>::infinity();
      rep.detail = e.what();
    }
    rep.record(margin, 1e-6);
    worst = std::max(worst, margin);
    if (!rep.passed && !rep.counterexample) rep.counterexample = trial.params();
  }
  std::ostringstream os;
  os << rep.trials - rep.failures << "/" << rep.trials << " integral, worst distance " << worst;
  if (!rep.detail.empty()) os << "; " << rep.detail;
  rep.detail = os.str();
  return rep;
}

namespace {

struct Segment {
  double share;
  VectorXd x;
  std::uint64_t mask;
};

}  // namespace

CheckReport verify_constant_price_dominance(const McInstance& inst, const ResourceModel& rm,
                                            const PipelineResult& ref, const OracleSettings& settings) {
  CheckReport rep;
  rep.name = "dominance";
  const Index J = inst.size();
  const ProfitEvaluator eval(inst);
  const double optimum = ref.objective;
  std::mt19937_64 rng(settings.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::uint64_t masks = std::uint64_t{1} << J;

  std::vector<std::uint64_t> reference_masks;
  for (const auto& c : ref.mixture.components) reference_masks.push_back(mask_of(c.assortment));

  auto value_and_usage = [&](const std::vector<Segment>& segs, VectorXd& usage) {
    double value = 0.0;
    VectorXd sales = VectorXd::Zero(J);
    for (const auto& s : segs) {
      const VectorXd q = eval.sales(s.mask, s.x);
      value += s.share * (s.x - inst.psi()).dot(q);
      sales += s.share * q;
    }
    usage = rm.lambda_bar * (rm.phi * sales);
    return rm.lambda_bar * value;
  };

  auto random_prices = [&](bool local) {
    VectorXd x(J);
    for (Index j = 0; j < J; ++j) {
      const double lo = inst.x_lower()[j], hi = inst.x_upper()[j];
      x[j] = local ? std::clamp(ref.mixture.x[j] + 0.05 * (hi - lo) * normal(rng), lo, hi) : lo + (hi - lo) * unit(rng);
    }
    return x;
  };

  // Self-comparison: the reference schedule itself.
  {
    std::vector<Segment> segs;
    for (const auto& c : ref.mixture.components) segs.push_back({c.weight, ref.mixture.x, mask_of(c.assortment)});
    VectorXd usage;
    const double value = value_and_usage(segs, usage);
    rep.record(std::abs(value - optimum) - 1e-8, 0.0);
  }

  int accepted = 0, attempts = 0;
  const int target = settings.schedule_samples;
  while (accepted < target && attempts < 200 * target) {
    ++attempts;
    const int count = 2 + static_cast<int>(unit(rng) < 0.5);
    const bool rescale = unit(rng) < 0.5;
    const int drawn = rescale ? count - 1 : count;
    std::vector<Segment> segs;
    double total = 0.0;
    for (int s = 0; s < drawn; ++s) {
      const bool local = unit(rng) < 0.5;
      std::uint64_t mask;
      if (local && !reference_masks.empty())
        mask = reference_masks[static_cast<std::size_t>(unit(rng) * static_cast<double>(reference_masks.size()))];
      else
        mask = static_cast<std::uint64_t>(unit(rng) * static_cast<double>(masks)) % masks;
      const double share = gamma(rng);
      total += share;
      segs.push_back({share, random_prices(local), mask});
    }
    for (auto& s : segs) s.share /= total;

    VectorXd usage;
    double value = value_and_usage(segs, usage);
    if (!within_capacity(rm, usage, 0.0)) {
      if (!rescale) continue;
      // Idle time with nothing offered scales usage down to the binding level.
      double t = 1.0;
      for (Index r = 0; r < rm.size(); ++r) {
        const auto& cap = rm.capacity[static_cast<std::size_t>(r)];
        if (cap && usage[r] > *cap) t = std::min(t, *cap / usage[r]);
      }
      for (auto& s : segs) s.share *= t;
      segs.push_back({1.0 - t, inst.x_lower(), 0});
      value = value_and_usage(segs, usage);
      if (!within_capacity(rm, usage, 1e-12)) continue;
    }
    ++accepted;
    rep.record(value - optimum, 1e-6);
  }

  // Two prices around the reference on its offered products, each carrying
  // the reference mixture, split in time so the capacity binds.
  std::uint64_t offered = 0;
  for (auto m : reference_masks) offered |= m;
  int split_cases = 0;
  bool between = true;
  auto mixture_at = [&](const VectorXd& x, double scale) {
    std::vector<Segment> segs;
    for (const auto& c : ref.mixture.components) segs.push_back({scale * c.weight, x, mask_of(c.assortment)});
    return segs;
  };
  if (offered) {
    for (double delta : {0.02, 0.05, 0.1, 0.25, 0.5}) {
      VectorXd lo_x = ref.mixture.x, hi_x = ref.mixture.x;
      for (Index j : bits(offered, J)) {
        lo_x[j] = std::max(inst.x_lower()[j], lo_x[j] - delta);
        hi_x[j] = std::min(inst.x_upper()[j], hi_x[j] + delta);
      }
      if (lo_x == hi_x) continue;
      VectorXd use_lo, use_hi;
      const double val_lo = value_and_usage(mixture_at(lo_x, 1.0), use_lo);
      const double val_hi = value_and_usage(mixture_at(hi_x, 1.0), use_hi);
      // Largest share of the low price that keeps every capacity.
      double f = 1.0;
      for (Index r = 0; r < rm.size(); ++r) {
        const auto& cap = rm.capacity[static_cast<std::size_t>(r)];
        if (!cap) continue;
        if (use_lo[r] > *cap) {
          if (use_hi[r] > *cap) f = -1.0;
          else f = std::min(f, (*cap - use_hi[r]) / (use_lo[r] - use_hi[r]));
        }
      }
      if (f < 0) continue;
      const double value = f * val_lo + (1.0 - f) * val_hi;
      ++split_cases;
      rep.record(value - optimum, 1e-6);
      for (Index j : bits(offered, J)) between = between && lo_x[j] <= ref.mixture.x[j] && ref.mixture.x[j] <= hi_x[j];
    }
  }
  if (!between) rep.passed = false;

  std::ostringstream os;
  os << accepted << " feasible schedules (" << attempts << " drawn), " << split_cases
     << " two-price splits, worst excess " << rep.worst_margin;
  rep.detail = os.str();
  if (accepted < target) {
    rep.passed = false;
    rep.detail += "; too few feasible schedules";
  }
  if (!rep.passed && !rep.counterexample) rep.counterexample = inst.params();
  return rep;
}

CheckReport check_special_cases(const McInstance& inst, const ResourceModel& rm, const OracleSettings& settings,
                                const SolverSettings& solver) {
  CheckReport rep;
  rep.name = "special";
  const Index J = inst.size();
  std::ostringstream os;

  // Fixed prices at the box midpoint against every assortment mixture.
  {
    const VectorXd target = (inst.x_lower() + inst.x_upper()) / 2;
    PipelineOptions opt;
    opt.mode = Mode::FixedPrice;
    opt.solver = solver;
    opt.target_prices = target;
    try {
      const PipelineResult res = run_pipeline(inst, rm, opt);
      const bool exact = res.decision.x == target;
      const MixtureLp lp = best_mixture_at_prices(inst, rm, target);
      const double gap = std::abs(res.objective - lp.objective);
      rep.record(gap, 1e-6);
      if (!exact) {
        rep.passed = false;
        ++rep.failures;
      }
      os << "fixed-price gap " << gap << (exact ? "" : " (prices moved)");
    } catch (const std::exception& e) {
      rep.record(std::numeric_limits<double>::infinity(), 0.0);
      os << "fixed-price failed: " << e.what();
    }
  }

  // Pricing only: every visited product fully available, optimum equal to a
  // price search with everything offered.
  if (J <= 4) {
    PipelineOptions opt;
    opt.mode = Mode::PricingOnly;
    opt.solver = solver;
    try {
      const PipelineResult res = run_pipeline(inst, rm, opt);
      double worst_a = 0.0;
      for (Index j = 0; j < J; ++j)
        if (res.decision.v[j] > 1e-9) worst_a = std::max(worst_a, std::abs(1.0 - res.decision.a[j]));
      rep.record(worst_a, 1e-6);
      const OracleOptimum grid = best_prices_for_assortment(inst, rm, Assortment::full(J), settings);
      const double allowed = grid.lipschitz * grid.grid_step + 1e-4;
      const double gap = std::abs(res.objective - grid.objective);
      rep.record(gap - allowed, 0.0);
      os << "; pricing-only availability gap " << worst_a << ", objective gap " << gap << " (allowed " << allowed << ")";
    } catch (const SolverFailure& e) {
      // Offering everything can be infeasible under capacities; then the
      // price search must not find a feasible point either.
      const OracleOptimum grid = best_prices_for_assortment(inst, rm, Assortment::full(J), settings);
      const bool agree = e.status() == SolveStatus::Infeasible && !std::isfinite(grid.objective);
      rep.record(agree ? 0.0 : std::numeric_limits<double>::infinity(), 0.0);
      os << "; pricing-only " << to_string(e.status()) << ", price search "
         << (std::isfinite(grid.objective) ? "found " + std::to_string(grid.objective) : std::string("infeasible too"));
    } catch (const std::exception& e) {
      rep.record(std::numeric_limits<double>::infinity(), 0.0);
      os << "; pricing-only failed: " << e.what();
    }
  }
  rep.detail = os.str();
  if (!rep.passed && !rep.counterexample) rep.counterexample = inst.params();
  return rep;
}

CheckReport check_oracle_sandwich(const McInstance& inst, const ResourceModel& rm, const PipelineResult& ref,
                                  const OracleSettings& settings) {
  CheckReport rep;
  rep.name = "sandwich";
  const OracleOptimum oracle = enumerate_assortment_optimum(inst, rm, settings);
  const double bound = oracle.lipschitz * oracle.grid_step + 1e-4;
  const double diff = ref.objective - oracle.objective;
  if (has_capacity(rm)) {
    // The oracle value is attainable, so it may trail the pipeline only by the
    // refinement error and may exceed it only by the grid bound.
    rep.record(std::max(diff - 1e-4, -diff - bound), 0.0);
  } else {
    rep.record(std::abs(diff) - bound, 0.0);
  }
  std::ostringstream os;
  os << "pipeline " << ref.objective << ", oracle " << oracle.objective << ", bound " << bound
     << (oracle.grid_too_coarse ? " (grid too coarse advisory)" : "");
  rep.detail = os.str();
  if (!rep.passed) rep.counterexample = inst.params();
  return rep;
}

}  // namespace mcrm
