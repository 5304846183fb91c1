#include "mcrm/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

namespace mcrm {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ParseError(where + ": " + what); }

void reject_unknown(const Json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(where, "unknown field \"" + key + "\"");
  }
}

const Json& field(const Json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing field \"") + key + "\"");
  return *it;
}

double number(const Json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

VectorXd numbers(const Json& v, const std::string& where, Index expected) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  if (static_cast<Index>(v.size()) != expected)
    fail(where, "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  VectorXd out(expected);
  for (Index i = 0; i < expected; ++i) out[i] = number(v[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
  return out;
}

Json array(const VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json members(const Assortment& a) {
  Json out = Json::array();
  for (Index j : a.members()) out.push_back(j);
  return out;
}

}  // namespace

InstanceFile parse_instance(const Json& doc) {
  reject_unknown(doc, "instance", {"schema_version", "lambda_bar", "horizon", "products", "resources"});
  const Json& version = field(doc, "instance", "schema_version");
  if (!version.is_number_integer() || version.get<int>() != instance_schema_version)
    fail("schema_version", "unsupported version " + version.dump());

  const Json& products = field(doc, "instance", "products");
  if (!products.is_array() || products.empty()) fail("products", "expected a non-empty array");
  const Index J = static_cast<Index>(products.size());

  InstanceFile file;
  auto& p = file.params;
  p.theta.resize(J);
  p.rho.resize(J, J);
  p.alpha.resize(J);
  p.beta.resize(J);
  p.psi.resize(J);
  p.x_lower.resize(J);
  p.x_upper.resize(J);
  VectorXd targets(J);
  Index with_target = 0;

  for (Index j = 0; j < J; ++j) {
    const std::string at = "products[" + std::to_string(j) + "]";
    const Json& prod = products[static_cast<std::size_t>(j)];
    reject_unknown(prod, at, {"theta", "rho", "alpha", "beta", "psi", "x_lower", "x_upper", "target_price"});
    p.theta[j] = number(field(prod, at, "theta"), at + ".theta");
    p.rho.row(j) = numbers(field(prod, at, "rho"), at + ".rho", J).transpose();
    p.alpha[j] = number(field(prod, at, "alpha"), at + ".alpha");
    p.beta[j] = number(field(prod, at, "beta"), at + ".beta");
    p.psi[j] = number(field(prod, at, "psi"), at + ".psi");
    p.x_lower[j] = number(field(prod, at, "x_lower"), at + ".x_lower");
    p.x_upper[j] = number(field(prod, at, "x_upper"), at + ".x_upper");
    if (prod.contains("target_price")) {
      targets[j] = number(prod["target_price"], at + ".target_price");
      ++with_target;
    }
  }
  if (with_target == J) file.target_prices = targets;
  else if (with_target != 0) fail("products", "target_price must be given for every product or none");

  file.resources.lambda_bar = doc.contains("lambda_bar") ? number(doc["lambda_bar"], "lambda_bar") : 1.0;
  file.horizon = doc.contains("horizon") ? number(doc["horizon"], "horizon") : 1.0;
  if (!(file.horizon > 0)) fail("horizon", "must be positive");

  const Json empty = Json::array();
  const Json& resources = doc.contains("resources") ? doc["resources"] : empty;
  if (!resources.is_array()) fail("resources", "expected an array");
  const Index R = static_cast<Index>(resources.size());
  file.resources.phi.resize(R, J);
  for (Index r = 0; r < R; ++r) {
    const std::string at = "resources[" + std::to_string(r) + "]";
    const Json& res = resources[static_cast<std::size_t>(r)];
    reject_unknown(res, at, {"phi", "capacity"});
    file.resources.phi.row(r) = numbers(field(res, at, "phi"), at + ".phi", J).transpose();
    const Json& cap = field(res, at, "capacity");
    if (cap.is_null()) file.resources.capacity.emplace_back();
    else file.resources.capacity.emplace_back(number(cap, at + ".capacity"));
  }
  return file;
}

InstanceFile parse_instance_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return parse_instance(doc);
}

InstanceFile read_instance_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_instance_text(buf.str());
}

Json instance_to_json(const InstanceFile& file) {
  const auto& p = file.params;
  Json doc;
  doc["schema_version"] = instance_schema_version;
  doc["lambda_bar"] = file.resources.lambda_bar;
  doc["horizon"] = file.horizon;
  Json products = Json::array();
  for (Index j = 0; j < p.theta.size(); ++j) {
    Json prod;
    prod["theta"] = p.theta[j];
    prod["rho"] = array(p.rho.row(j).transpose());
    prod["alpha"] = p.alpha[j];
    prod["beta"] = p.beta[j];
    prod["psi"] = p.psi[j];
    prod["x_lower"] = p.x_lower[j];
    prod["x_upper"] = p.x_upper[j];
    if (file.target_prices) prod["target_price"] = (*file.target_prices)[j];
    products.push_back(std::move(prod));
  }
  doc["products"] = std::move(products);
  Json resources = Json::array();
  for (Index r = 0; r < file.resources.size(); ++r) {
    Json res;
    res["phi"] = array(file.resources.phi.row(r).transpose());
    const auto& cap = file.resources.capacity[static_cast<std::size_t>(r)];
    res["capacity"] = cap ? Json(*cap) : Json(nullptr);
    resources.push_back(std::move(res));
  }
  doc["resources"] = std::move(resources);
  return doc;
}

std::string instance_digest(const InstanceFile& file) {
  const std::string canonical = instance_to_json(file).dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

Json solution_report(const PipelineResult& res, const ResourceModel& rm, const std::string& digest,
                     const ReportOptions& options) {
  const auto& sol = res.solution;
  Json doc;
  doc["report_version"] = report_schema_version;
  doc["instance_digest"] = digest;
  doc["mode"] = std::string(to_string(res.mode));
  doc["program"] = std::string(to_string(res.compiled.map.kind));
  doc["status"] = std::string(to_string(sol.status));
  doc["objective"] = res.objective;
  doc["conic"] = {{"primal_objective", sol.primal_objective},
                  {"dual_objective", sol.dual_objective},
                  {"duality_gap", sol.duality_gap},
                  {"primal_residual", sol.primal_residual},
                  {"dual_residual", sol.dual_residual}};
  doc["prices"] = array(res.decision.x);
  doc["intensities"] = array(res.decision.a);
  doc["visits"] = array(res.decision.v);

  Json mixture = Json::array();
  for (const auto& c : res.mixture.components) mixture.push_back({{"assortment", members(c.assortment)}, {"weight", c.weight}});
  doc["mixture"] = std::move(mixture);

  Json intervals = Json::array();
  for (const auto& iv : res.schedule.intervals)
    intervals.push_back({{"start", iv.start}, {"end", iv.end}, {"assortment", members(iv.assortment)}});
  doc["schedule"] = {{"horizon", res.schedule.horizon}, {"intervals", std::move(intervals)}};

  Json resources = Json::array();
  for (Index r = 0; r < rm.size(); ++r) {
    const auto& cap = rm.capacity[static_cast<std::size_t>(r)];
    resources.push_back({{"usage", res.usage.size() > r ? res.usage[r] : 0.0}, {"capacity", cap ? Json(*cap) : Json(nullptr)}});
  }
  doc["resources"] = std::move(resources);

  doc["solver"] = {{"iterations", sol.iterations}, {"tolerance", res.tolerance_used}};
  if (options.include_timing) doc["solver"]["wall_time_seconds"] = res.elapsed_seconds;
  return doc;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string list(const Json& arr) {
  std::string out = "[";
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (i) out += ", ";
    out += arr[i].is_number_integer() ? std::to_string(arr[i].get<long long>()) : fmt(arr[i].get<double>());
  }
  return out + "]";
}

}  // namespace

std::string report_text(const Json& r) {
  std::ostringstream os;
  os << "status      " << r["status"].get<std::string>() << "\n"
     << "mode        " << r["mode"].get<std::string>() << " (" << r["program"].get<std::string>() << ")\n"
     << "objective   " << fmt(r["objective"].get<double>()) << "\n"
     << "gap         " << fmt(r["conic"]["duality_gap"].get<double>()) << "\n"
     << "prices      " << list(r["prices"]) << "\n"
     << "intensities " << list(r["intensities"]) << "\n"
     << "mixture\n";
  for (const auto& c : r["mixture"]) os << "  " << fmt(c["weight"].get<double>()) << "  " << list(c["assortment"]) << "\n";
  os << "schedule over [0, " << fmt(r["schedule"]["horizon"].get<double>()) << "]\n";
  for (const auto& iv : r["schedule"]["intervals"])
    os << "  [" << fmt(iv["start"].get<double>()) << ", " << fmt(iv["end"].get<double>()) << ")  "
       << list(iv["assortment"]) << "\n";
  if (!r["resources"].empty()) {
    os << "resources\n";
    std::size_t k = 0;
    for (const auto& res : r["resources"]) {
      os << "  " << k++ << "  usage " << fmt(res["usage"].get<double>()) << "  capacity "
         << (res["capacity"].is_null() ? std::string("none") : fmt(res["capacity"].get<double>())) << "\n";
    }
  }
  os << "iterations  " << r["solver"]["iterations"].get<long long>() << "\n";
  if (r["solver"].contains("wall_time_seconds"))
    os << "wall time   " << fmt(r["solver"]["wall_time_seconds"].get<double>()) << " s\n";
  os << "digest      " << r["instance_digest"].get<std::string>() << "\n";
  return os.str();
}

Json to_json(const ValidationReport& report) {
  Json out = Json::array();
  for (const auto& v : report.violations) {
    Json idx = Json::array();
    for (Index i : v.indices) idx.push_back(i);
    out.push_back({{"rule", v.rule}, {"detail", v.detail}, {"indices", std::move(idx)}});
  }
  return out;
}

}  // namespace mcrm
