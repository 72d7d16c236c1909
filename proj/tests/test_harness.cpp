#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "kq/errors.hpp"
#include "kq/harness/cache.hpp"
#include "kq/harness/config.hpp"
#include "kq/harness/runner.hpp"

using namespace kq;
using namespace kq::harness;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kq-harness-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json small_json() {
  return json::parse(R"({
    "model": {"name": "CP1", "resolution": 12},
    "suite": [{"family": "zero"}],
    "k_list": [2, 4],
    "experiments": ["bergman"]
  })");
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "kqlab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    for (std::string c; std::getline(s, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("config parsing and field-level errors") {
  const ExperimentConfig c = parse_config(small_json());
  CHECK(c.model == "CP1");
  CHECK(c.k_list == std::vector<int>{2, 4});
  CHECK(!c.seed);

  json j = small_json();
  j["suite"][0]["family"] = "gaussian";
  CHECK(config_error(j).find("suite[0].family") != std::string::npos);

  j = small_json();
  j["suite"][0] = {{"family", "legendre"}, {"l", 2}};
  CHECK(config_error(j).find("suite[0].eps") != std::string::npos);

  j = small_json();
  j["colour"] = "blue";
  CHECK(config_error(j).find("colour") != std::string::npos);

  j = small_json();
  j.erase("k_list");
  CHECK(config_error(j).find("k_list") != std::string::npos);

  j = small_json();
  j["experiments"] = {"lemmas"};
  CHECK(config_error(j).find("seed") != std::string::npos);

  j = small_json();
  j["model"]["name"] = "CP2_toric";
  j["experiments"] = {"kenergy"};
  CHECK(config_error(j).find("kenergy") != std::string::npos);

  j = small_json();
  j["k_list"] = {4, 2};
  CHECK(!config_error(j).empty());
}

TEST_CASE("k beyond the model resolution is a capability error") {
  json j = small_json();
  j["model"]["resolution"] = 40;
  j["k_list"] = {100};
  CHECK_THROWS_AS(parse_config(j), CapabilityError);
}

TEST_CASE("shipped default config matches the built-in default") {
  const ExperimentConfig shipped = load_config(fs::path(KQ_SOURCE_DIR) / "configs" / "default.json");
  CHECK(shipped.hash() == default_config().hash());
  const ExperimentConfig cp2 = load_config(fs::path(KQ_SOURCE_DIR) / "configs" / "cp2_toric.json");
  CHECK(cp2.model == "CP2_toric");
}

TEST_CASE("config hash ignores output location") {
  ExperimentConfig a = default_config(), b = default_config();
  b.output_dir = "elsewhere";
  b.cache_enabled = false;
  CHECK(a.hash() == b.hash());
  b.k_list.push_back(24);
  CHECK(a.hash() != b.hash());
  CHECK(parse_config(a.to_json()).hash() == a.hash());
}

TEST_CASE("gram cache: hit, grid change, corruption") {
  const fs::path root = scratch("cache");
  std::ostringstream log;
  const Model m12 = Model::build("CP1", 12), m16 = Model::build("CP1", 16);
  const Potential phi = Potential::legendre(2, 0.3);

  GramCache cache(root, &log);
  const GramMatrix g1 = cache.get(m12, phi, 8);
  CHECK(cache.misses() == 1);
  const GramMatrix g2 = cache.get(m12, phi, 8);
  CHECK(cache.hits() == 1);
  CHECK((g1.matrix() - g2.matrix()).norm() == 0.0);

  cache.get(m16, phi, 8);
  CHECK(cache.misses() == 2);

  // truncate the stored entry
  const fs::path file = cache.path_for(GramCache::descriptor(m12, phi, 8));
  REQUIRE(fs::exists(file));
  const std::string body = slurp(file);
  std::ofstream(file, std::ios::trunc) << body.substr(0, body.size() / 2);
  GramCache again(root, &log);
  const GramMatrix g3 = again.get(m12, phi, 8);
  CHECK(again.misses() == 1);
  CHECK((g3.matrix() - g1.matrix()).norm() == 0.0);
  CHECK(log.str().find("warning") != std::string::npos);
  CHECK(slurp(file) == body);

  // flip a digit inside the data: the checksum catches it
  json j = json::parse(body);
  j["re"][0] = j["re"][0].get<double>() * (1.0 + 1e-12);
  std::ofstream(file, std::ios::trunc) << j.dump();
  log.str("");
  GramCache third(root, &log);
  third.get(m12, phi, 8);
  CHECK(third.misses() == 1);
  CHECK(log.str().find("checksum") != std::string::npos);

  GramCache off("", nullptr);
  CHECK(!off.enabled());
  off.get(m12, phi, 4);
  CHECK(off.hits() == 0);
}

TEST_CASE("bergman run on the reference metric") {
  const fs::path out = scratch("bergman");
  ExperimentConfig c = parse_config(small_json());
  c.output_dir = out.string();
  c.cache_enabled = false;
  const RunReport r = run(c);
  CHECK(r.passed());
  CHECK(r.exit_code() == 0);
  const auto rows = read_csv(out / "bergman.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "potential");
  for (int i = 1; i <= 2; ++i) {
    const double k = std::stod(rows[i][1]);
    CHECK(std::stod(rows[i][3]) == doctest::Approx((k + 1) / k).epsilon(1e-12));
    CHECK(std::stod(rows[i][4]) == doctest::Approx((k + 1) / k).epsilon(1e-12));
  }
  const json s = json::parse(slurp(out / "summary.json"));
  CHECK(s["tool"] == "kqlab");
  CHECK(s["config_hash"] == c.hash());
  CHECK(s["passed"] == true);
  CHECK(s.dump().find(out.string()) == std::string::npos);
}

TEST_CASE("runs are byte-identical and independent of the cache state") {
  const fs::path a = scratch("det-a"), b = scratch("det-b");
  json j = small_json();
  j["suite"].push_back({{"family", "legendre"}, {"l", 2}, {"eps", 0.3}});
  j["k_list"] = {2, 4, 6, 8};
  j["experiments"] = {"bergman", "rates", "lemmas", "titerate"};
  j["seed"] = 11;
  j["lemmas"] = {{"random_pairs", 2}};
  j["titerate"] = {{"iterations", 20}};
  ExperimentConfig c = parse_config(j);
  c.cache_dir = (a / "cache").string();
  c.output_dir = a.string();
  run(c);
  c.output_dir = b.string();
  run(c);  // warm cache
  for (const char* f : {"bergman.csv", "rates.csv", "lemmas.csv", "titerate.csv", "summary.json"}) {
    INFO(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("cli");
  const fs::path cfg = dir / "c.json";
  json j = small_json();
  j["output_dir"] = (dir / "out").string();
  std::ofstream(cfg) << j.dump();

  std::string out, err;
  CHECK(cli({"bergman", "--config", cfg.string(), "--no-cache", "-q"}, &out) == 0);
  CHECK(out.find("passed") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "bergman.csv"));

  CHECK(cli({"bergman", "--config", cfg.string(), "--k", "5.."}, nullptr, &err) == 2);
  CHECK(err.find("MIN..MAX") != std::string::npos);
  CHECK(cli({"bergman", "--config", cfg.string(), "--k", "2..3", "--no-cache", "-q"}) == 0);
  CHECK(cli({"bergman", "--config", cfg.string(), "--k", "2..40"}, nullptr, &err) == 2);
  CHECK(err.find("capability") != std::string::npos);
  CHECK(cli({"frobnicate"}) == 2);
  CHECK(cli({}) == 2);
  CHECK(cli({"lemmas", "--config", cfg.string()}, nullptr, &err) == 2);
  CHECK(err.find("seed") != std::string::npos);

  // an impossible tolerance makes the mass identity fail: exit 1
  j["tolerances"] = {{"algebraic", 1e-300}};
  std::ofstream(cfg, std::ios::trunc) << j.dump();
  CHECK(cli({"bergman", "--config", cfg.string(), "--no-cache", "-q"}, nullptr, &err) == 1);
  CHECK(err.find("FAIL") != std::string::npos);
  const json s = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(s["passed"] == false);
  CHECK(!s["failures"].empty());

  std::ofstream(cfg, std::ios::trunc) << "{ not json";
  CHECK(cli({"bergman", "--config", cfg.string()}) == 2);
}
