#include <charconv>
#include <ostream>

#include "CLI11.hpp"
#include "kq/errors.hpp"
#include "kq/harness/runner.hpp"

namespace kq::harness {

namespace {

// "MIN..MAX", inclusive, both ends required.
std::vector<int> parse_k_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw ArgumentError("--k expects MIN..MAX, got '" + text + "'");
  auto to_int = [&](std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw ArgumentError("--k expects MIN..MAX, got '" + text + "'");
    return v;
  };
  const std::string_view sv(text);
  const int lo = to_int(sv.substr(0, dots)), hi = to_int(sv.substr(dots + 2));
  if (lo < 1 || hi < lo) throw ArgumentError("--k range " + text + " is empty or starts below 1");
  std::vector<int> ks;
  for (int k = lo; k <= hi; ++k) ks.push_back(k);
  return ks;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kqlab: numerical Kahler quantization experiments"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir, k_range;
  std::uint64_t seed = 0;
  bool no_cache = false, quiet = false;

  std::vector<std::string> names = kExperiments;
  names.push_back("all");
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name, name == "all" ? "every experiment applicable to the model" : "run " + name);
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--k", k_range, "level range MIN..MAX");
    sub->add_flag("--no-cache", no_cache, "do not read or write the Gram cache");
    sub->add_flag("-q,--quiet", quiet, "no progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "kqlab: " << e.what() << '\n' << "run 'kqlab --help' for usage\n";
    return 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  try {
    ExperimentConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (sub->count("--seed")) cfg.seed = seed;
    if (!k_range.empty()) cfg.k_list = parse_k_range(k_range);
    RunOptions opt;
    opt.no_cache = no_cache;
    opt.log = quiet ? nullptr : &err;
    opt.experiments = cmd == "all" ? applicable_experiments(cfg.model) : std::vector<std::string>{cmd};
    const RunReport rep = run(cfg, opt);
    for (const auto& f : rep.failures) err << "FAIL " << f << '\n';
    out << (rep.passed() ? "passed" : "failed") << ": " << rep.summary_path.string() << '\n';
    return rep.exit_code();
  } catch (const ConfigError& e) {
    err << "kqlab: config error: " << e.what() << '\n';
  } catch (const CapabilityError& e) {
    err << "kqlab: capability exceeded: " << e.what() << '\n';
  } catch (const ArgumentError& e) {
    err << "kqlab: " << e.what() << '\n';
  } catch (const nlohmann::json::exception& e) {
    err << "kqlab: config error: " << e.what() << '\n';
  } catch (const Error& e) {
    // numerical failure mid-run: counts as a failed check
    err << "kqlab: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace kq::harness
