#include "kq/harness/runner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "kq/asymptotics.hpp"
#include "kq/functionals.hpp"
#include "kq/harness/cache.hpp"
#include "kq/numerics.hpp"

namespace kq::harness {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct Checks {
  std::string experiment;
  int passed = 0;
  std::vector<std::string> failed;

  bool operator()(bool ok, const std::string& what) {
    if (ok)
      ++passed;
    else
      failed.push_back(experiment + ": " + what);
    return ok;
  }
  json to_json() const { return {{"passed", passed}, {"failed", failed.size()}, {"failures", failed}}; }
};

json fit_json(const std::string& series, const std::string& potential, const std::vector<std::pair<int, double>>& pts) {
  json j = {{"series", series}, {"potential", potential}};
  try {
    const DecayFit f = fit_decay(pts);
    j["exact"] = f.exact;
    if (!f.exact) {
      j["C"] = f.C;
      j["p"] = f.p;
      j["r2"] = f.r2;
      j["k_min"] = f.k_min;
      j["k_max"] = f.k_max;
    }
  } catch (const ArgumentError& e) {
    j["error"] = e.what();
  }
  return j;
}

// Potentials whose metric is an automorphism pullback of the reference (hence cscK and balanced).
bool is_csck(const PotentialSpec& p) {
  return p.family == "zero" || p.family == "constant" || p.family == "mobius" || p.family == "toric_mobius";
}

Potential auxiliary(const Model& model) {
  return model.kind() == ModelKind::CP1 ? Potential::legendre(1, 0.4) : Potential::toric_bump(1.0);
}

std::string fmt_k(const std::string& label, int k) { return label + " k=" + std::to_string(k); }

std::mt19937_64 rng_for(const ExperimentConfig& c, const char* experiment) {
  return std::mt19937_64(*c.seed ^ fnv1a(std::string_view(experiment)));
}

double kn(const Model& m, int k) { return std::pow(static_cast<double>(k), m.dim()); }

struct Context {
  const ExperimentConfig& cfg;
  const Model& model;
  std::vector<Potential> suite;
  std::vector<std::string> labels;
  GramCache& cache;
  std::filesystem::path out;
};

// ---------------------------------------------------------------- bergman

json run_bergman(Context& c, Checks& check, std::vector<std::filesystem::path>& tables) {
  Csv csv(c.out / "bergman.csv", {"potential", "k", "n_sections", "rho_min", "rho_max", "rho_closed_form", "mass",
                                  "mass_expected", "balanced_defect"});
  const double tol = c.cfg.tol.algebraic;
  const double nfact = c.model.dim() == 1 ? 1.0 : 2.0;
  for (std::size_t p = 0; p < c.suite.size(); ++p) {
    const PotentialField f = c.suite[p].evaluate(c.model);
    for (int k : c.cfg.k_list) {
      const GramMatrix g = c.cache.get(c.model, c.suite[p], k);
      const ScalarField d = orthonormal_density(c.model, power_metric(c.model, f, k), g);
      const double scale = g.size() * nfact / (c.model.volume() * kn(c.model, k));
      std::vector<double> w(c.model.size());
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double rho = scale * d.values[i];
        lo = std::min(lo, rho);
        hi = std::max(hi, rho);
        w[i] = rho * f.volume_ratio(i, 1.0);
      }
      const double mass = c.model.integrate(w);
      const double defect = almost_balanced_defect(c.model, c.suite[p], k);
      const std::string where = fmt_k(c.labels[p], k);
      check(std::abs(mass - scale) <= tol * scale, where + ": mass identity off by " + num(mass - scale));
      if (is_csck(c.cfg.suite[p])) {
        check(std::max(std::abs(lo - scale), std::abs(hi - scale)) <= tol, where + ": Bergman kernel not constant");
        check(defect <= tol, where + ": balanced defect " + num(defect));
      }
      if (c.cfg.suite[p].family == "zero") {
        const GramMatrix ref = reference_gram(c.model, k);
        double err = 0.0;
        for (int a = 0; a < g.size(); ++a)
          err = std::max(err, std::abs(g.matrix()(a, a).real() / ref.matrix()(a, a).real() - 1.0));
        check(g.is_diagonal() && err <= tol, where + ": Gram differs from closed form by " + num(err));
      }
      csv.row({c.labels[p], std::to_string(k), std::to_string(g.size()), num(lo), num(hi),
               is_csck(c.cfg.suite[p]) ? num(scale) : "", num(mass), num(scale), num(defect)});
    }
  }
  tables.push_back(csv.path());
  return {{"table", "bergman.csv"}, {"cache_hits", c.cache.hits()}};
}

// ---------------------------------------------------------------- rates

json run_rates(Context& c, Checks&, std::vector<std::filesystem::path>& tables) {
  const bool cp1 = c.model.kind() == ModelKind::CP1;
  Csv csv(c.out / "rates.csv",
          {"potential", "k", "residual_order0", "residual_order1", "potential_rate", "form_rate", "order1_below_order0"});
  json fits = json::array();
  for (std::size_t p = 0; p < c.suite.size(); ++p) {
    const auto r0 = expansion_residual(c.model, c.suite[p], c.cfg.k_list, 0);
    std::vector<std::pair<int, double>> r1;
    if (cp1) r1 = expansion_residual(c.model, c.suite[p], c.cfg.k_list, 1);
    const auto mr = bergman_metric_rate(c.model, c.suite[p], c.cfg.k_list);
    std::vector<std::pair<int, double>> pot, form;
    for (std::size_t i = 0; i < mr.size(); ++i) {
      pot.emplace_back(mr[i].k, mr[i].potential);
      form.emplace_back(mr[i].k, mr[i].form);
      const double v1 = cp1 ? r1[i].second : NAN;
      csv.row({c.labels[p], std::to_string(mr[i].k), num(r0[i].second), num(v1), num(mr[i].potential),
               num(mr[i].form), cp1 ? (v1 <= r0[i].second ? "true" : "false") : ""});
    }
    // cscK members are closed forms; fitting their rounding noise says nothing
    if (c.cfg.k_list.size() >= 4 && !is_csck(c.cfg.suite[p])) {
      fits.push_back(fit_json("residual_order0", c.labels[p], r0));
      if (cp1) fits.push_back(fit_json("residual_order1", c.labels[p], r1));
      fits.push_back(fit_json("potential_rate", c.labels[p], pot));
      fits.push_back(fit_json("form_rate", c.labels[p], form));
    }
  }
  tables.push_back(csv.path());
  return {{"table", "rates.csv"}, {"fits", fits}};
}

// ---------------------------------------------------------------- lemmas

json run_lemmas(Context& c, Checks& check, std::vector<std::filesystem::path>& tables) {
  Csv csv(c.out / "lemmas.csv", {"check", "subject", "k", "value", "bound", "passed"});
  const auto& tol = c.cfg.tol;
  auto record = [&](const std::string& name, const std::string& subject, int k, double value, double bound, bool ok) {
    check(ok, name + " " + fmt_k(subject, k) + ": " + num(value) + " vs " + num(bound));
    csv.row({name, subject, std::to_string(k), num(value), num(bound), ok ? "true" : "false"});
  };
  std::mt19937_64 rng = rng_for(c.cfg, "lemmas");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_metric = [&](int k) {
    // Convex combinations of suite members stay in the Kahler cone; constants are free.
    std::vector<double> w(c.suite.size());
    double sum = 0.0;
    for (double& x : w) sum += (x = unit(rng));
    const double s = unit(rng);
    PotentialField f = (s * w[0] / sum) * c.suite[0].evaluate(c.model);
    for (std::size_t i = 1; i < w.size(); ++i) f += (s * w[i] / sum) * c.suite[i].evaluate(c.model);
    MetricLevelK m = power_metric(c.model, f, k);
    return scale_metric(std::move(m), 2.0 * unit(rng) - 1.0);
  };
  const Potential aux = auxiliary(c.model);
  json step3 = json::array();
  for (int k : c.cfg.k_list) {
    for (int pair = 0; pair < c.cfg.random_pairs; ++pair) {
      const MetricLevelK a = random_metric(k), b = random_metric(k);
      const Conv1Slack s = lemma_conv1_check(c.model, a, b);
      const std::string subject = "pair" + std::to_string(pair);
      record("conv1_lower", subject, k, s.lower, -tol.quadrature, s.lower >= -tol.quadrature);
      record("conv1_upper", subject, k, s.upper, -tol.quadrature, s.upper >= -tol.quadrature);
    }
  }
  for (std::size_t p = 0; p < c.suite.size(); ++p) {
    const std::string& label = c.labels[p];
    std::vector<std::pair<int, double>> gaps;
    for (int k : c.cfg.k_list) {
      const MetricLevelK m = power_metric(c.model, c.suite[p], k);
      const double i0 = aubin_yau(c.model, m, PathSpec::linear(c.cfg.t_order));
      const double shift = aubin_yau(c.model, scale_metric(m, 0.7), PathSpec::linear(c.cfg.t_order)) - i0;
      const double law = 0.7 * c.model.volume() * kn(c.model, k);
      record("aubin_yau_scaling", label, k, std::abs(shift - law), tol.algebraic * std::max(1.0, law),
             std::abs(shift - law) <= tol.algebraic * std::max(1.0, law));
      const PotentialField via =
          double(k) * (0.5 * (c.suite[p].evaluate(c.model) + aux.evaluate(c.model)));
      const double two = aubin_yau(c.model, m, PathSpec::two_leg(via, c.cfg.t_order));
      record("aubin_yau_path", label, k, std::abs(two - i0), tol.quadrature, std::abs(two - i0) <= tol.quadrature);

      const double g1 = lemma_step1_gap(c.model, c.suite[p], k);
      record("step1_gap", label, k, g1, -tol.quadrature, g1 >= -tol.quadrature);
      if (is_csck(c.cfg.suite[p])) record("step1_exact", label, k, std::abs(g1), tol.algebraic, std::abs(g1) <= tol.algebraic);

      const Step2Report s2 = lemma_step2_check(c.model, c.suite[p], Potential::zero(), k);
      const double slack_tol = tol.quadrature * (1.0 + std::abs(s2.f1 - s2.f0) / (c.model.volume() * kn(c.model, k)));
      record("step2_convexity", label, k, s2.convexity_slack, -slack_tol, s2.convexity_slack >= -slack_tol);
      csv.row({"step2_gap", label, std::to_string(k), num(s2.gap), "", ""});
      csv.row({"step2_lambda_over_k", label, std::to_string(k), num(s2.lambda_hat_max / k), "", ""});

      const double g3 = lemma_step3_gap(c.model, c.suite[p], k);
      if (is_csck(c.cfg.suite[p]))
        record("step3_gap", label, k, g3, tol.algebraic, g3 <= tol.algebraic);
      else
        csv.row({"step3_gap", label, std::to_string(k), num(g3), "", ""});
      gaps.emplace_back(k, g3);
    }
    if (c.cfg.k_list.size() >= 4 && !is_csck(c.cfg.suite[p])) step3.push_back(fit_json("step3_gap", label, gaps));
  }
  tables.push_back(csv.path());
  return {{"table", "lemmas.csv"}, {"fits", step3}};
}

// ---------------------------------------------------------------- geodesic

json run_geodesic(Context& c, Checks& check, std::vector<std::filesystem::path>& tables) {
  Csv csv(c.out / "geodesic.csv", {"k", "sample", "s", "f"});
  Csv sum(c.out / "geodesic_summary.csv",
          {"base", "k", "sample", "min_second_difference", "fprime_surrogate", "fprime_integral"});
  PotentialSpec base_spec = c.cfg.geodesic_base ? *c.cfg.geodesic_base : c.cfg.suite.front();
  if (!c.cfg.geodesic_base)
    for (const auto& s : c.cfg.suite)
      if (!is_csck(s)) {
        base_spec = s;
        break;
      }
  const Potential base = base_spec.build();
  const std::string label = base.label();
  std::mt19937_64 rng = rng_for(c.cfg, "geodesic");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> s_grid;
  for (int i = 0; i < c.cfg.geodesic_points; ++i) s_grid.push_back(-1.0 + 2.0 * i / (c.cfg.geodesic_points - 1));
  const double tol = c.cfg.tol.asymptotic;
  for (int k : c.cfg.k_list) {
    const GramMatrix h = bergman_sequence(c.model, base, k).H_star;
    for (int smp = 0; smp < c.cfg.geodesic_samples; ++smp) {
      std::vector<double> lam(h.size());
      for (double& x : lam) x = u(rng);
      const GeodesicResult r = f_geodesic(c.model, GeodesicSpec::make(h, lam, {}, s_grid));
      for (std::size_t i = 0; i < r.s.size(); ++i)
        csv.row({std::to_string(k), std::to_string(smp), num(r.s[i]), num(r.f[i])});
      sum.row({label, std::to_string(k), std::to_string(smp), num(r.min_second_difference), num(r.fprime_surrogate),
               num(r.fprime_integral)});
      const std::string where = fmt_k(label, k) + " sample " + std::to_string(smp);
      check(r.min_second_difference >= -tol, where + ": second difference " + num(r.min_second_difference));
      const double diff = std::abs(r.fprime_surrogate - r.fprime_integral);
      check(diff <= tol * std::abs(r.fprime_integral) + c.cfg.tol.algebraic,
            where + ": f'(0) surrogate vs integral differ by " + num(diff));
    }
    // Stationarity at the balanced reference.
    std::vector<double> lam(section_count(c.model, k));
    for (double& x : lam) x = u(rng);
    const GeodesicResult z = f_geodesic(c.model, GeodesicSpec::make(reference_gram(c.model, k), lam, {}, s_grid));
    sum.row({"zero", std::to_string(k), "0", num(z.min_second_difference), num(z.fprime_surrogate),
             num(z.fprime_integral)});
    check(std::abs(z.fprime_integral) <= c.cfg.tol.algebraic,
          fmt_k("zero", k) + ": f'(0) at the balanced base is " + num(z.fprime_integral));
    std::size_t mid = 0;
    for (std::size_t i = 1; i < z.s.size(); ++i)
      if (std::abs(z.s[i]) < std::abs(z.s[mid])) mid = i;
    double below = 0.0;
    for (double v : z.f) below = std::max(below, z.f[mid] - v);
    check(below <= c.cfg.tol.algebraic * std::max(1.0, std::abs(z.f[mid])),
          fmt_k("zero", k) + ": f dips below f(0) by " + num(below));
  }
  tables.push_back(csv.path());
  tables.push_back(sum.path());
  return {{"table", "geodesic.csv"}, {"summary_table", "geodesic_summary.csv"}, {"base", label}};
}

// ---------------------------------------------------------------- titerate

json run_titerate(Context& c, Checks& check, std::vector<std::filesystem::path>& tables) {
  Csv csv(c.out / "titerate.csv", {"k", "iteration", "defect", "log_det"});
  std::mt19937_64 rng = rng_for(c.cfg, "titerate");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  json rows = json::array();
  for (int k : c.cfg.k_list) {
    const GramMatrix ref = reference_gram(c.model, k);
    std::vector<double> lam(ref.size());
    double mean = 0.0;
    for (double& x : lam) mean += (x = u(rng)) / lam.size();
    Eigen::VectorXd d(ref.size());
    for (int a = 0; a < ref.size(); ++a)
      d(a) = ref.matrix()(a, a).real() * std::exp(c.cfg.titerate_perturbation * (lam[a] - mean));
    const TIterationResult r = t_iterate(c.model, GramMatrix::diagonal(k, d), c.cfg.titerate_iterations, 0.0);
    double worst = 0.0;
    for (std::size_t j = 0; j < r.defect_history.size(); ++j) {
      csv.row({std::to_string(k), std::to_string(j), num(r.defect_history[j]), num(r.log_det_history[j])});
      worst = std::max(worst, std::abs(std::expm1(r.log_det_history[j])));
    }
    const double first = r.defect_history.front(), last = r.defect_history.back();
    check(last < first / 10.0 || first <= c.cfg.tol.algebraic,
          "k=" + std::to_string(k) + ": defect " + num(first) + " -> " + num(last) + " after " +
              std::to_string(r.iterations) + " iterations");
    check(worst <= c.cfg.tol.algebraic, "k=" + std::to_string(k) + ": det drifted by " + num(worst));
    rows.push_back({{"k", k}, {"initial_defect", first}, {"final_defect", last}, {"iterations", r.iterations}});
  }
  tables.push_back(csv.path());
  return {{"table", "titerate.csv"}, {"runs", rows}};
}

// ---------------------------------------------------------------- kenergy

json run_kenergy(Context& c, Checks& check, std::vector<std::filesystem::path>& tables) {
  Csv csv(c.out / "kenergy.csv", {"potential", "linear", "two_leg", "family", "fine_oracle"});
  const Model fine = Model::build(c.model.name(), std::min(2 * c.model.resolution(), c.cfg.limits.max_resolution),
                                  c.cfg.limits);
  const auto& tol = c.cfg.tol;
  const Potential aux = auxiliary(c.model);
  json values = json::object();
  for (std::size_t p = 0; p < c.suite.size(); ++p) {
    const std::string& label = c.labels[p];
    const PotentialField f = c.suite[p].evaluate(c.model);
    const double lin = k_energy(c.model, f, PathSpec::linear(c.cfg.t_order));
    const double two = k_energy(c.model, f, PathSpec::two_leg(0.5 * (f + aux.evaluate(c.model)), c.cfg.t_order));
    const double ref = k_energy(fine, c.suite[p], PathSpec::linear(c.cfg.t_order, 4));
    double fam = NAN;
    if (c.cfg.suite[p].family == "mobius") {
      fam = k_energy(c.model, f, PathSpec::family(c.cfg.suite[p].a, c.cfg.t_order));
      check(std::abs(fam - lin) <= tol.quadrature, label + ": family vs linear path " + num(fam - lin));
      check(std::abs(lin) <= tol.asymptotic, label + ": K-energy on the automorphism orbit is " + num(lin));
    }
    check(lin >= -tol.asymptotic, label + ": K-energy " + num(lin) + " is negative");
    check(std::abs(two - lin) <= tol.quadrature, label + ": two-leg vs linear path " + num(two - lin));
    check(std::abs(ref - lin) <= tol.quadrature, label + ": refined quadrature differs by " + num(ref - lin));
    csv.row({label, num(lin), num(two), num(fam), num(ref)});
    values[label] = lin;
  }
  tables.push_back(csv.path());
  return {{"table", "kenergy.csv"}, {"nu", values}};
}

// ---------------------------------------------------------------- theorem1

json run_theorem1(Context& c, Checks& check, std::vector<std::filesystem::path>& tables) {
  Csv csv(c.out / "theorem1.csv", {"potential", "k", "nu", "l_diff", "approx_error", "step1_gap", "step2_gap",
                                   "step2_convexity", "step3_gap", "chain"});
  const FunctionalReport rep =
      theorem1_suite(c.model, c.suite, c.cfg.k_list, SuiteTolerances{c.cfg.tol.asymptotic, c.cfg.tol.quadrature});
  for (const auto& f : rep.failures) check(false, f);
  check.passed += static_cast<int>(rep.entries.size() * (1 + 2 * c.cfg.k_list.size()) - rep.failures.size());
  json entries = json::array();
  for (std::size_t p = 0; p < rep.entries.size(); ++p) {
    const auto& e = rep.entries[p];
    std::vector<std::pair<int, double>> approx;
    for (const auto& r : e.rows) {
      const double err = std::abs(2.0 * r.l_diff - e.nu);
      approx.emplace_back(r.k, err);
      csv.row({e.potential, std::to_string(r.k), num(e.nu), num(r.l_diff), num(err), num(r.step1_gap),
               num(r.step2_gap), num(r.step2_convexity), num(r.step3_gap), num(r.chain)});
    }
    json j = {{"potential", e.potential}, {"nu", e.nu}, {"chain_c", e.chain_c}};
    if (approx.size() >= 4 && !is_csck(c.cfg.suite[p])) j["approx_fit"] = fit_json("approx_error", e.potential, approx);
    entries.push_back(j);
  }
  tables.push_back(csv.path());
  return {{"table", "theorem1.csv"}, {"entries", entries}};
}

}  // namespace

RunReport run(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<std::string> experiments = options.experiments.empty() ? config.experiments : options.experiments;
  {
    ExperimentConfig probe = config;
    probe.experiments = experiments;
    probe.validate();
  }
  const Model model = Model::build(config.model, config.resolution, config.limits);
  std::vector<Potential> suite;
  for (std::size_t i = 0; i < config.suite.size(); ++i) {
    suite.push_back(config.suite[i].build());
    try {
      suite.back().evaluate(model);
    } catch (const PositivityError& e) {
      throw ConfigError("suite[" + std::to_string(i) + "]: " + e.what());
    }
  }
  std::filesystem::create_directories(config.output_dir);
  const std::filesystem::path cache_root =
      (config.cache_enabled && !options.no_cache)
          ? resolve_cache_root(config.cache_dir, std::filesystem::path(config.output_dir) / "cache")
          : std::filesystem::path();
  GramCache cache(cache_root, options.log);
  Context c{config, model, suite, {}, cache, config.output_dir};
  for (const auto& p : suite) c.labels.push_back(p.label());

  RunReport report;
  json exps = json::object();
  for (const std::string& name : experiments) {
    Checks check{name, 0, {}};
    if (options.log) *options.log << "running " << name << '\n';
    json data;
    if (name == "bergman") data = run_bergman(c, check, report.tables);
    else if (name == "rates") data = run_rates(c, check, report.tables);
    else if (name == "lemmas") data = run_lemmas(c, check, report.tables);
    else if (name == "geodesic") data = run_geodesic(c, check, report.tables);
    else if (name == "titerate") data = run_titerate(c, check, report.tables);
    else if (name == "kenergy") data = run_kenergy(c, check, report.tables);
    else if (name == "theorem1") data = run_theorem1(c, check, report.tables);
    data.erase("cache_hits");  // varies between cold and warm runs
    data["checks"] = check.to_json();
    exps[name] = data;
    report.failures.insert(report.failures.end(), check.failed.begin(), check.failed.end());
  }
  report.summary = {{"tool", "kqlab"},
                    {"version", kToolVersion},
                    {"config_hash", config.hash()},
                    {"model", {{"name", model.name()}, {"resolution", model.resolution()}, {"nodes", model.size()}}},
                    {"seed", config.seed ? json(*config.seed) : json(nullptr)},
                    {"k_list", config.k_list},
                    {"experiments", exps},
                    {"failures", report.failures},
                    {"passed", report.passed()}};
  report.summary_path = std::filesystem::path(config.output_dir) / "summary.json";
  std::ofstream out(report.summary_path);
  out << report.summary.dump(2) << '\n';
  if (!out) throw Error("cannot write " + report.summary_path.string());
  return report;
}

}  // namespace kq::harness
