#include "mcrm/io.hpp"
#include "mcrm/oracle.hpp"
#include "mcrm/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace mcrm;

// Public exit codes; see README.
enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kInvalid = 3,
  kSolver = 4,
  kDrift = 5,
  kCheckFailed = 6,
  kOverCap = 7,
};

struct Flags {
  std::string path;
  std::string mode = "network";
  double tol = 1e-8;
  int max_iters = 200000;
  std::uint64_t seed = 0;
  std::string out = "json";
  std::string dump_program;
  bool timing = false;
  std::string checks = "all";
  double grid_step = 0.0;
  int trials = 20;
};

const std::vector<std::string> kCheckOrder = {"integrality", "dominance", "special", "sandwich"};
const std::map<std::string, Index> kCheckCap = {{"integrality", 12}, {"dominance", 4}, {"special", 4}, {"sandwich", 3}};

struct Loaded {
  InstanceFile file;
  std::optional<McInstance> inst;
  std::string digest;
};

// Returns an exit code, or kOk with loaded filled in.
int load(const Flags& f, Loaded& out) {
  try {
    out.file = read_instance_file(f.path);
  } catch (const ParseError& e) {
    std::cerr << "mcrm: parse error: " << e.what() << "\n";
    return kParse;
  }
  auto outcome = validate_instance(out.file.params);
  ValidationReport res = validate_resources(out.file.resources, out.file.params.theta.size());
  if (!outcome.report.ok() || !res.ok()) {
    auto& all = outcome.report.violations;
    all.insert(all.end(), res.violations.begin(), res.violations.end());
    std::cerr << "mcrm: invalid instance\n";
    for (const auto& v : all) {
      std::cerr << "  " << v.rule << ": " << v.detail;
      if (!v.indices.empty()) {
        std::cerr << " [";
        for (std::size_t i = 0; i < v.indices.size(); ++i) std::cerr << (i ? ", " : "") << v.indices[i];
        std::cerr << "]";
      }
      std::cerr << "\n";
    }
    return kInvalid;
  }
  out.inst = std::move(outcome.instance);
  out.digest = instance_digest(out.file);
  return kOk;
}

SolverSettings solver_settings(const Flags& f) {
  SolverSettings s;
  s.tolerance = f.tol;
  s.max_iterations = f.max_iters;
  s.seed = f.seed;
  return s;
}

// Runs the pipeline, mapping its failures to exit codes.
int solve_pipeline(const Loaded& in, const PipelineOptions& opt, std::optional<PipelineResult>& result) {
  try {
    result = run_pipeline(*in.inst, in.file.resources, opt);
    return kOk;
  } catch (const SolverFailure& e) {
    std::cerr << "mcrm: solver stopped: " << e.what() << "\n";
    return kSolver;
  } catch (const DriftExceeded& e) {
    std::cerr << "mcrm: recovery drift: " << e.what() << "\n";
    return kDrift;
  } catch (const NonConvergence& e) {
    std::cerr << "mcrm: reduction failed: " << e.what() << "\n";
    return kDrift;
  }
}

int run_solve(const Flags& f) {
  const auto mode = parse_mode(f.mode);
  if (!mode) {
    std::cerr << "mcrm: unknown mode " << f.mode << "\n";
    return kUsage;
  }
  Loaded in;
  if (int rc = load(f, in)) return rc;

  PipelineOptions opt;
  opt.mode = *mode;
  opt.solver = solver_settings(f);
  opt.horizon = in.file.horizon;
  opt.target_prices = in.file.target_prices;

  if (!f.dump_program.empty()) {
    // Dump what would be compiled, even if the solve later fails.
    const McInstance compiled_inst =
        *mode == Mode::FixedPrice
            ? pin_prices(*in.inst, in.file.target_prices.value_or(
                                       0.5 * (in.inst->x_lower() + in.inst->x_upper())))
            : *in.inst;
    CompiledProgram cp = *mode == Mode::Static       ? build_sp3(compiled_inst)
                         : *mode == Mode::PricingOnly ? build_rp3(compiled_inst, in.file.resources)
                                                      : build_rp2(compiled_inst, in.file.resources);
    std::ofstream os(f.dump_program);
    if (!os) {
      std::cerr << "mcrm: cannot write " << f.dump_program << "\n";
      return kUsage;
    }
    write_program_dump(os, cp.program);
  }

  std::optional<PipelineResult> result;
  if (int rc = solve_pipeline(in, opt, result)) return rc;

  const Json report = solution_report(*result, in.file.resources, in.digest, {f.timing});
  if (f.out == "text") std::cout << report_text(report);
  else std::cout << report.dump(2) << "\n";
  return kOk;
}

std::string dump_counterexample(const CheckReport& rep, const Loaded& in) {
  InstanceFile file = in.file;
  file.params = *rep.counterexample;
  const auto path = std::filesystem::temp_directory_path() /
                    ("mcrm-counterexample-" + rep.name + "-" + in.digest.substr(0, 12) + ".json");
  std::ofstream(path) << instance_to_json(file).dump(2) << "\n";
  return path.string();
}

int run_verify(const Flags& f) {
  std::vector<std::string> selected;
  if (f.checks == "all") {
    selected = kCheckOrder;
  } else {
    std::stringstream ss(f.checks);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!kCheckCap.count(name)) {
        std::cerr << "mcrm: unknown check " << name << "\n";
        return kUsage;
      }
      if (std::find(selected.begin(), selected.end(), name) == selected.end()) selected.push_back(name);
    }
  }

  Loaded in;
  if (int rc = load(f, in)) return rc;
  const Index J = in.inst->size();
  for (const auto& name : selected) {
    if (J > kCheckCap.at(name)) {
      std::cerr << "mcrm: check " << name << " supports at most " << kCheckCap.at(name) << " products, instance has "
                << J << "\n";
      return kOverCap;
    }
  }

  OracleSettings os;
  os.grid_step = f.grid_step;
  os.seed = f.seed + 1;
  const SolverSettings solver = solver_settings(f);

  std::optional<PipelineResult> reference;
  const bool needs_reference = std::any_of(selected.begin(), selected.end(),
                                           [](const std::string& n) { return n == "dominance" || n == "sandwich"; });
  if (needs_reference) {
    PipelineOptions opt;
    opt.solver = solver;
    opt.horizon = in.file.horizon;
    if (int rc = solve_pipeline(in, opt, reference)) return rc;
  }

  std::vector<CheckReport> reports;
  for (const auto& name : selected) {
    if (name == "integrality") reports.push_back(check_integrality_no_resources(*in.inst, f.trials, os, solver));
    else if (name == "dominance")
      reports.push_back(verify_constant_price_dominance(*in.inst, in.file.resources, *reference, os));
    else if (name == "special") reports.push_back(check_special_cases(*in.inst, in.file.resources, os, solver));
    else reports.push_back(check_oracle_sandwich(*in.inst, in.file.resources, *reference, os));
  }

  bool ok = true;
  Json doc;
  doc["instance_digest"] = in.digest;
  Json rows = Json::array();
  std::ostringstream table;
  table << "check         result  trials  failures  worst_margin\n";
  for (const auto& rep : reports) {
    ok = ok && rep.passed;
    Json row = {{"check", rep.name}, {"passed", rep.passed}, {"trials", rep.trials}, {"failures", rep.failures},
                {"worst_margin", rep.worst_margin}, {"detail", rep.detail}};
    char line[160];
    std::snprintf(line, sizeof line, "%-13s %-7s %6d  %8d  %12.3e\n", rep.name.c_str(), rep.passed ? "pass" : "FAIL",
                  rep.trials, rep.failures, rep.worst_margin);
    table << line;
    if (!rep.passed && rep.counterexample) {
      const std::string path = dump_counterexample(rep, in);
      row["counterexample"] = path;
      table << "  counterexample written to " << path << "\n";
    }
    rows.push_back(std::move(row));
  }
  doc["checks"] = std::move(rows);
  doc["passed"] = ok;
  if (f.out == "text") std::cout << table.str();
  else std::cout << doc.dump(2) << "\n";
  return ok ? kOk : kCheckFailed;
}

void common_options(CLI::App* cmd, Flags& f) {
  cmd->add_option("instance", f.path, "Instance JSON file")->required();
  cmd->add_option("--tol", f.tol, "Solver tolerance")->envname("MCRM_TOL")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", f.max_iters, "Solver iteration cap")->envname("MCRM_MAX_ITERS")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Random seed")->envname("MCRM_SEED");
  cmd->add_option("--out", f.out, "Report format")->envname("MCRM_OUT")->check(CLI::IsMember({"json", "text"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint pricing and assortment planning under the Markov chain choice model"};
  app.require_subcommand(1);
  Flags f;

  auto* solve = app.add_subcommand("solve", "Solve an instance and print the report");
  common_options(solve, f);
  solve->add_option("--mode", f.mode, "network, static, pricing-only or fixed-price")
      ->envname("MCRM_MODE")
      ->check(CLI::IsMember({"network", "static", "pricing-only", "fixed-price"}));
  solve->add_option("--dump-program", f.dump_program, "Write the compiled conic program to this file")
      ->envname("MCRM_DUMP_PROGRAM");
  solve->add_flag("--timing", f.timing, "Include wall time in the report")->envname("MCRM_TIMING");

  auto* verify = app.add_subcommand("verify", "Run the brute-force checks against an instance");
  common_options(verify, f);
  verify->add_option("--checks", f.checks, "Comma list of integrality, dominance, special, sandwich, or all")
      ->envname("MCRM_CHECKS");
  verify->add_option("--grid-step", f.grid_step, "Oracle price grid step, 0 for automatic")
      ->envname("MCRM_GRID_STEP")
      ->check(CLI::NonNegativeNumber);
  verify->add_option("--trials", f.trials, "Perturbed copies for the integrality check")
      ->envname("MCRM_TRIALS")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    return solve->parsed() ? run_solve(f) : run_verify(f);
  } catch (const std::exception& e) {
    std::cerr << "mcrm: " << e.what() << "\n";
    return kUsage;
  }
}
