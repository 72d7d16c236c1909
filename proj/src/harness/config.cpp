#include "kq/harness/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "kq/numerics.hpp"

namespace kq::harness {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ConfigError(where + ": " + what); }

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) fail(where + "." + it.key(), "unknown field");
}

double get_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(where + "." + key, "missing");
  if (!j.at(key).is_number()) fail(where + "." + key, "expected a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, const std::string& where) {
  if (!j.at(key).is_number_integer()) fail(where + "." + key, "expected an integer");
  return j.at(key).get<int>();
}

bool cp1_family(const std::string& f) { return f == "mobius" || f == "legendre"; }
bool cp2_family(const std::string& f) { return f == "toric_mobius" || f == "toric_bump"; }

}  // namespace

Potential PotentialSpec::build() const {
  if (family == "zero") return Potential::zero();
  if (family == "constant") return Potential::constant(a);
  if (family == "mobius") return Potential::mobius(a);
  if (family == "legendre") return Potential::legendre(l, a);
  if (family == "toric_mobius") return Potential::toric_mobius(a, b);
  if (family == "toric_bump") return Potential::toric_bump(a);
  throw ConfigError("unknown potential family '" + family + "'");
}

json PotentialSpec::to_json() const {
  json j = {{"family", family}};
  if (family == "constant") j["c"] = a;
  if (family == "mobius") j["lambda"] = a;
  if (family == "legendre") {
    j["l"] = l;
    j["eps"] = a;
  }
  if (family == "toric_mobius") {
    j["lambda1"] = a;
    j["lambda2"] = b;
  }
  if (family == "toric_bump") j["eps"] = a;
  return j;
}

PotentialSpec PotentialSpec::from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) fail(where + ".family", "missing or not a string");
  PotentialSpec p;
  p.family = j.at("family").get<std::string>();
  if (p.family == "zero") {
    reject_unknown(j, where, {"family"});
  } else if (p.family == "constant") {
    reject_unknown(j, where, {"family", "c"});
    p.a = get_number(j, "c", where);
  } else if (p.family == "mobius") {
    reject_unknown(j, where, {"family", "lambda"});
    p.a = get_number(j, "lambda", where);
    if (!(p.a > 0.0)) fail(where + ".lambda", "must be positive");
  } else if (p.family == "legendre") {
    reject_unknown(j, where, {"family", "l", "eps"});
    get_number(j, "l", where);
    p.l = get_int(j, "l", where);
    if (p.l < 1 || p.l > 3) fail(where + ".l", "must be 1, 2 or 3");
    p.a = get_number(j, "eps", where);
  } else if (p.family == "toric_mobius") {
    reject_unknown(j, where, {"family", "lambda1", "lambda2"});
    p.a = get_number(j, "lambda1", where);
    p.b = get_number(j, "lambda2", where);
    if (!(p.a > 0.0) || !(p.b > 0.0)) fail(where, "lambda1 and lambda2 must be positive");
  } else if (p.family == "toric_bump") {
    reject_unknown(j, where, {"family", "eps"});
    p.a = get_number(j, "eps", where);
  } else {
    fail(where + ".family", "unknown family '" + p.family + "'");
  }
  return p;
}

bool experiment_needs_seed(const std::string& name) {
  return name == "lemmas" || name == "geodesic" || name == "titerate";
}

std::vector<std::string> applicable_experiments(const std::string& model) {
  if (model == "CP1") return kExperiments;
  return {"bergman", "rates", "lemmas", "geodesic", "titerate"};
}

json ExperimentConfig::to_json() const {
  json suite_j = json::array();
  for (const auto& p : suite) suite_j.push_back(p.to_json());
  json j = {
      {"model", {{"name", model}, {"resolution", resolution}, {"max_resolution", limits.max_resolution},
                 {"max_nodes", limits.max_nodes}}},
      {"suite", suite_j},
      {"k_list", k_list},
      {"experiments", experiments},
      {"tolerances", {{"algebraic", tol.algebraic}, {"quadrature", tol.quadrature}, {"asymptotic", tol.asymptotic}}},
      {"output_dir", output_dir},
      {"cache", {{"enabled", cache_enabled}, {"dir", cache_dir}}},
      {"t_order", t_order},
      {"geodesic", {{"samples", geodesic_samples}, {"points", geodesic_points}}},
      {"lemmas", {{"random_pairs", random_pairs}}},
      {"titerate", {{"iterations", titerate_iterations}, {"perturbation", titerate_perturbation}}},
  };
  if (geodesic_base) j["geodesic"]["base"] = geodesic_base->to_json();
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

std::string ExperimentConfig::hash() const {
  // Output location and cache policy do not affect results.
  json j = to_json();
  j.erase("output_dir");
  j.erase("cache");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

void ExperimentConfig::validate() const {
  if (model != "CP1" && model != "CP2_toric") fail("model.name", "unknown model '" + model + "'");
  if (resolution < 1) fail("model.resolution", "must be >= 1");
  if (resolution > limits.max_resolution)
    fail("model.resolution", std::to_string(resolution) + " exceeds max_resolution " + std::to_string(limits.max_resolution));
  if (suite.empty()) fail("suite", "must list at least one potential");
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const std::string& f = suite[i].family;
    if ((model == "CP1" && cp2_family(f)) || (model == "CP2_toric" && cp1_family(f)))
      fail("suite[" + std::to_string(i) + "].family", "'" + f + "' is not defined on " + model);
  }
  if (geodesic_base && ((model == "CP1" && cp2_family(geodesic_base->family)) ||
                        (model == "CP2_toric" && cp1_family(geodesic_base->family))))
    fail("geodesic.base.family", "'" + geodesic_base->family + "' is not defined on " + model);
  if (k_list.empty()) fail("k_list", "must not be empty");
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    if (k_list[i] < 1) fail("k_list[" + std::to_string(i) + "]", "must be >= 1");
    if (i > 0 && k_list[i] <= k_list[i - 1]) fail("k_list", "must be strictly increasing");
    if (k_list[i] > resolution)
      throw CapabilityError("k_list[" + std::to_string(i) + "]: level " + std::to_string(k_list[i]) +
                            " exceeds the capability of a resolution-" + std::to_string(resolution) + " grid");
  }
  if (experiments.empty()) fail("experiments", "must not be empty");
  const auto ok = applicable_experiments(model);
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    const std::string& e = experiments[i];
    const std::string where = "experiments[" + std::to_string(i) + "]";
    if (std::find(kExperiments.begin(), kExperiments.end(), e) == kExperiments.end())
      fail(where, "unknown experiment '" + e + "'");
    if (std::find(ok.begin(), ok.end(), e) == ok.end()) fail(where, e + " is not available on " + model);
    if (experiment_needs_seed(e) && !seed) fail("seed", "required by experiment '" + e + "'");
  }
  if (t_order < 1 || t_order > 64) fail("t_order", "must be in [1, 64]");
  if (geodesic_samples < 1) fail("geodesic.samples", "must be >= 1");
  if (geodesic_points < 3) fail("geodesic.points", "must be >= 3");
  if (random_pairs < 1) fail("lemmas.random_pairs", "must be >= 1");
  if (titerate_iterations < 1) fail("titerate.iterations", "must be >= 1");
  if (!(tol.algebraic > 0) || !(tol.quadrature > 0) || !(tol.asymptotic > 0)) fail("tolerances", "must be positive");
}

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j, "config",
                 {"model", "suite", "k_list", "experiments", "seed", "tolerances", "output_dir", "cache", "t_order",
                  "geodesic", "lemmas", "titerate"});
  ExperimentConfig c;
  if (!j.contains("model")) fail("model", "missing");
  const json& m = j.at("model");
  reject_unknown(m, "model", {"name", "resolution", "max_resolution", "max_nodes"});
  if (!m.contains("name") || !m.at("name").is_string()) fail("model.name", "missing or not a string");
  c.model = m.at("name").get<std::string>();
  if (!m.contains("resolution")) fail("model.resolution", "missing");
  c.resolution = get_int(m, "resolution", "model");
  if (m.contains("max_resolution")) c.limits.max_resolution = get_int(m, "max_resolution", "model");
  if (m.contains("max_nodes")) c.limits.max_nodes = static_cast<std::size_t>(get_number(m, "max_nodes", "model"));

  if (!j.contains("suite") || !j.at("suite").is_array()) fail("suite", "missing or not an array");
  for (std::size_t i = 0; i < j.at("suite").size(); ++i)
    c.suite.push_back(PotentialSpec::from_json(j.at("suite")[i], "suite[" + std::to_string(i) + "]"));

  if (!j.contains("k_list") || !j.at("k_list").is_array()) fail("k_list", "missing or not an array");
  for (std::size_t i = 0; i < j.at("k_list").size(); ++i) {
    const json& v = j.at("k_list")[i];
    if (!v.is_number_integer()) fail("k_list[" + std::to_string(i) + "]", "expected an integer");
    c.k_list.push_back(v.get<int>());
  }

  if (j.contains("experiments")) {
    if (!j.at("experiments").is_array()) fail("experiments", "expected an array");
    for (std::size_t i = 0; i < j.at("experiments").size(); ++i) {
      const json& v = j.at("experiments")[i];
      if (!v.is_string()) fail("experiments[" + std::to_string(i) + "]", "expected a string");
      c.experiments.push_back(v.get<std::string>());
    }
  } else {
    c.experiments = applicable_experiments(c.model);
  }

  if (j.contains("seed") && !j.at("seed").is_null()) {
    const json& v = j.at("seed");
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail("seed", "expected a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    reject_unknown(t, "tolerances", {"algebraic", "quadrature", "asymptotic"});
    if (t.contains("algebraic")) c.tol.algebraic = get_number(t, "algebraic", "tolerances");
    if (t.contains("quadrature")) c.tol.quadrature = get_number(t, "quadrature", "tolerances");
    if (t.contains("asymptotic")) c.tol.asymptotic = get_number(t, "asymptotic", "tolerances");
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) fail("output_dir", "expected a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("cache")) {
    const json& k = j.at("cache");
    reject_unknown(k, "cache", {"enabled", "dir"});
    if (k.contains("enabled")) {
      if (!k.at("enabled").is_boolean()) fail("cache.enabled", "expected a boolean");
      c.cache_enabled = k.at("enabled").get<bool>();
    }
    if (k.contains("dir") && !k.at("dir").is_null()) {
      if (!k.at("dir").is_string()) fail("cache.dir", "expected a string");
      c.cache_dir = k.at("dir").get<std::string>();
    }
  }
  if (j.contains("t_order")) c.t_order = get_int(j, "t_order", "config");
  if (j.contains("geodesic")) {
    const json& g = j.at("geodesic");
    reject_unknown(g, "geodesic", {"base", "samples", "points"});
    if (g.contains("base")) c.geodesic_base = PotentialSpec::from_json(g.at("base"), "geodesic.base");
    if (g.contains("samples")) c.geodesic_samples = get_int(g, "samples", "geodesic");
    if (g.contains("points")) c.geodesic_points = get_int(g, "points", "geodesic");
  }
  if (j.contains("lemmas")) {
    const json& l = j.at("lemmas");
    reject_unknown(l, "lemmas", {"random_pairs"});
    if (l.contains("random_pairs")) c.random_pairs = get_int(l, "random_pairs", "lemmas");
  }
  if (j.contains("titerate")) {
    const json& t = j.at("titerate");
    reject_unknown(t, "titerate", {"iterations", "perturbation"});
    if (t.contains("iterations")) c.titerate_iterations = get_int(t, "iterations", "titerate");
    if (t.contains("perturbation")) c.titerate_perturbation = get_number(t, "perturbation", "titerate");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.suite = {{"zero"}, {"mobius", 2.0}, {"legendre", 0.3, 0.0, 2}, {"legendre", 0.15, 0.0, 3}, {"legendre", 0.1, 0.0, 1}};
  c.k_list = {4, 8, 12, 16, 20};
  c.experiments = applicable_experiments(c.model);
  c.seed = 20240611;
  c.geodesic_base = PotentialSpec{"legendre", 0.2, 0.0, 2};
  return c;
}

}  // namespace kq::harness
