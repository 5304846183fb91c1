#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string data(const std::string& name) { return std::string(MCRM_DATA_DIR) + "/" + name; }

// Runs the CLI with stdout captured and stderr dropped.
Run mcrm(const std::string& args) {
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "mcrm-cli-test.out";
  const std::string cmd = std::string(MCRM_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("solve exits cleanly and reports") {
    const Run r = mcrm("solve " + data("single_product.json"));
    CHECK(r.code == 0);
    CHECK(r.out.find("\"status\": \"optimal\"") != std::string::npos);
    CHECK(mcrm("solve " + data("two_product.json") + " --out text").code == 0);
  }

  TEST_CASE("reports repeat byte for byte") {
    const Run a = mcrm("solve " + data("two_product.json"));
    const Run b = mcrm("solve " + data("two_product.json"));
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
  }

  TEST_CASE("error exit codes") {
    CHECK(mcrm("").code == 1);
    CHECK(mcrm("solve " + data("two_product.json") + " --tol -1").code == 1);
    CHECK(mcrm("solve /nonexistent.json").code == 2);
    const std::string extra = write_temp(
        "mcrm-cli-extra.json",
        R"({"schema_version": 1, "products": [{"theta": 1, "rho": [0], "alpha": 0, "beta": 1, "psi": 0,
            "x_lower": 0, "x_upper": 10, "colour": 1}]})");
    CHECK(mcrm("solve " + extra).code == 2);
    CHECK(mcrm("solve " + data("malformed_theta.json")).code == 3);
    CHECK(mcrm("solve " + data("two_product.json") + " --max-iters 3").code == 4);
  }

  TEST_CASE("verify runs the requested checks") {
    const Run all = mcrm("verify " + data("two_product.json") + " --out text");
    CHECK(all.code == 0);
    for (const char* name : {"integrality", "dominance", "special", "sandwich"})
      CHECK(all.out.find(name) != std::string::npos);

    const Run one = mcrm("verify " + data("two_product.json") + " --out text --checks=integrality");
    CHECK(one.code == 0);
    CHECK(one.out.find("integrality") != std::string::npos);
    CHECK(one.out.find("sandwich") == std::string::npos);
    CHECK(one.out.find("dominance") == std::string::npos);
  }

  TEST_CASE("verify refuses instances above the caps") {
    std::string products;
    for (int j = 0; j < 5; ++j) {
      products += std::string(j ? "," : "") + R"({"theta": 0.2, "rho": [0,0,0,0,0], "alpha": 0, "beta": 1,)" +
                  R"( "psi": 0, "x_lower": 0, "x_upper": 5})";
    }
    const std::string five = write_temp("mcrm-cli-five.json", R"({"schema_version": 1, "products": [)" + products + "]}");
    CHECK(mcrm("solve " + five).code == 0);
    CHECK(mcrm("verify " + five + " --checks=dominance").code == 7);
  }

  TEST_CASE("static mode equals network mode without resources") {
    const Run net = mcrm("solve " + data("two_product_unconstrained.json") + " --out text");
    const Run stat = mcrm("solve " + data("two_product_unconstrained.json") + " --out text --mode static");
    REQUIRE(net.code == 0);
    REQUIRE(stat.code == 0);
    auto objective = [](const std::string& text) {
      const auto at = text.find("objective");
      return std::stod(text.substr(text.find_first_not_of(' ', at + 9)));
    };
    CHECK(std::abs(objective(net.out) - objective(stat.out)) <= 1e-6);
  }

  TEST_CASE("program dump is written") {
    const std::filesystem::path dump = std::filesystem::temp_directory_path() / "mcrm-cli-dump.txt";
    std::filesystem::remove(dump);
    CHECK(mcrm("solve " + data("single_product.json") + " --dump-program " + dump.string()).code == 0);
    std::ifstream in(dump);
    std::string first;
    std::getline(in, first);
    CHECK(first == "mcrm-conic-program 1");
  }

  TEST_CASE("environment variables act as defaults") {
    const std::string base = std::string(MCRM_CLI) + " solve " + data("two_product.json") + " > /dev/null 2>&1";
    CHECK(std::system(("MCRM_OUT=text " + base).c_str()) == 0);
    const int status = std::system(("MCRM_MAX_ITERS=3 " + base).c_str());
    CHECK(WEXITSTATUS(status) == 4);
  }

  TEST_CASE("a failing check leaves a counterexample") {
    // A loose solve leaves fractional availabilities behind.
    const Run r = mcrm("verify " + data("two_product_unconstrained.json") + " --out text --tol 1e-2 --checks=integrality");
    CHECK(r.code == 6);
    CHECK(r.out.find("FAIL") != std::string::npos);
    const auto at = r.out.find("written to ");
    REQUIRE(at != std::string::npos);
    const std::string path = r.out.substr(at + 11, r.out.find('\n', at) - at - 11);
    CHECK(std::filesystem::exists(path));
  }
}
