#include "fixtures.hpp"
#include "mcrm/io.hpp"
#include "mcrm/recovery.hpp"

#include <doctest.h>

#include <cmath>

using namespace mcrm;

namespace {

const char* two_text = R"({
  "schema_version": 1,
  "lambda_bar": 1.0,
  "horizon": 1.0,
  "products": [
    {"theta": 0.6, "rho": [0.0, 0.3], "alpha": 1.0, "beta": 1.0, "psi": 0.2, "x_lower": 1.0, "x_upper": 3.0},
    {"theta": 0.4, "rho": [0.2, 0.0], "alpha": 0.5, "beta": 0.8, "psi": 0.1, "x_lower": 0.7, "x_upper": 2.7}
  ],
  "resources": [{"phi": [1.0, 1.0], "capacity": 0.2}]
})";

Json two_doc() { return Json::parse(two_text); }

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("parse matches the hand-built fixture") {
    const InstanceFile f = parse_instance_text(two_text);
    const McParameters p = fixtures::two_params();
    CHECK(f.params.theta == p.theta);
    CHECK(f.params.rho == p.rho);
    CHECK(f.params.alpha == p.alpha);
    CHECK(f.params.beta == p.beta);
    CHECK(f.params.psi == p.psi);
    CHECK(f.params.x_lower == p.x_lower);
    CHECK(f.params.x_upper == p.x_upper);
    CHECK(f.resources.phi == fixtures::two_resources().phi);
    REQUIRE(f.resources.capacity.size() == 1);
    CHECK(*f.resources.capacity[0] == 0.2);
    CHECK(f.horizon == 1.0);
    CHECK_FALSE(f.target_prices);
  }

  TEST_CASE("round trip and stable digest") {
    const InstanceFile f = parse_instance_text(two_text);
    const Json again = instance_to_json(f);
    const InstanceFile g = parse_instance(again);
    CHECK(instance_to_json(g) == again);
    CHECK(instance_digest(f) == instance_digest(g));
    CHECK(instance_digest(f).size() == 64);

    // Whitespace and key order do not matter; values do.
    Json doc = two_doc();
    CHECK(instance_digest(parse_instance_text(doc.dump())) == instance_digest(f));
    doc["products"][0]["psi"] = 0.25;
    CHECK(instance_digest(parse_instance(doc)) != instance_digest(f));
  }

  TEST_CASE("defaults and optional fields") {
    Json doc = two_doc();
    doc.erase("lambda_bar");
    doc.erase("horizon");
    doc.erase("resources");
    const InstanceFile f = parse_instance(doc);
    CHECK(f.resources.lambda_bar == 1.0);
    CHECK(f.horizon == 1.0);
    CHECK(f.resources.size() == 0);

    doc = two_doc();
    doc["resources"][0]["capacity"] = nullptr;
    CHECK_FALSE(parse_instance(doc).resources.capacity[0]);

    doc = two_doc();
    doc["products"][0]["target_price"] = 2.0;
    doc["products"][1]["target_price"] = 1.5;
    const InstanceFile t = parse_instance(doc);
    REQUIRE(t.target_prices);
    CHECK(*t.target_prices == (VectorXd(2) << 2.0, 1.5).finished());
  }

  TEST_CASE("malformed files are rejected") {
    CHECK_THROWS_AS(parse_instance_text("{"), ParseError);
    CHECK_THROWS_AS(parse_instance_text("[]"), ParseError);

    Json doc = two_doc();
    doc["products"][0]["gamma"] = 1.0;
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["extra"] = true;
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["products"][1].erase("beta");
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["products"][1]["rho"] = {0.2};
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["resources"][0]["phi"] = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["products"][0]["alpha"] = "1";
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["schema_version"] = 2;
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["horizon"] = 0.0;
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    doc = two_doc();
    doc["products"][0]["target_price"] = 2.0;  // only one of two
    CHECK_THROWS_AS(parse_instance(doc), ParseError);

    CHECK_THROWS_AS(read_instance_file("/nonexistent/instance.json"), ParseError);
  }

  TEST_CASE("parsed but invalid instances reach validation") {
    const InstanceFile f = read_instance_file(std::string(MCRM_DATA_DIR) + "/malformed_theta.json");
    CHECK(validate_instance(f.params).report.has("theta normalization"));
    const Json j = to_json(validate_instance(f.params).report);
    CHECK(j.dump().find("theta normalization") != std::string::npos);
  }

  TEST_CASE("report content agrees with the schedule replay") {
    const InstanceFile f = parse_instance_text(two_text);
    const McInstance inst = make_instance(f.params);
    PipelineOptions opt;
    opt.horizon = 4.0;
    const PipelineResult res = run_pipeline(inst, f.resources, opt);
    const Json rep = solution_report(res, f.resources, instance_digest(f));

    CHECK(rep["report_version"] == report_schema_version);
    CHECK(rep["status"] == "optimal");
    CHECK(rep["instance_digest"] == instance_digest(f));
    const double objective = rep["objective"].get<double>();
    CHECK(std::abs(objective - schedule_objective(inst, f.resources.lambda_bar, res.schedule)) <= 1e-6);

    // Replay from the report alone.
    VectorXd x(2);
    for (int j = 0; j < 2; ++j) x[j] = rep["prices"][j].get<double>();
    double replay = 0.0, weight = 0.0;
    for (const auto& iv : rep["schedule"]["intervals"]) {
      const double len = iv["end"].get<double>() - iv["start"].get<double>();
      std::vector<Index> members;
      for (const auto& j : iv["assortment"]) members.push_back(j.get<Index>());
      replay += len / 4.0 * expected_profit(inst, f.resources, Assortment(members), x);
      weight += len;
    }
    CHECK(std::abs(weight - 4.0) <= 1e-12);
    CHECK(std::abs(replay - objective) <= 1e-6);
    CHECK(rep["resources"][0]["usage"].get<double>() <= 0.2 + 1e-6);
    CHECK_FALSE(rep["solver"].contains("wall_time_seconds"));
    CHECK(solution_report(res, f.resources, "d", {true})["solver"].contains("wall_time_seconds"));
    CHECK(report_text(rep).find("objective") != std::string::npos);
  }

  TEST_CASE("reports are byte-identical across runs") {
    const InstanceFile f = parse_instance_text(two_text);
    const McInstance inst = make_instance(f.params);
    const std::string a = solution_report(run_pipeline(inst, f.resources), f.resources, instance_digest(f)).dump();
    const std::string b = solution_report(run_pipeline(inst, f.resources), f.resources, instance_digest(f)).dump();
    CHECK(a == b);
  }
}
