#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kq/manifold.hpp"

namespace kq::harness {

/// One potential family member as written in a config file.
struct PotentialSpec {
  std::string family;  // zero, constant, mobius, legendre, toric_mobius, toric_bump
  double a = 0.0;      // c, lambda, eps, lambda1 or eps
  double b = 0.0;      // lambda2
  int l = 0;           // legendre degree

  Potential build() const;
  nlohmann::json to_json() const;
  static PotentialSpec from_json(const nlohmann::json& j, const std::string& where);
};

struct Tolerances {
  double algebraic = 1e-10;
  double quadrature = 1e-8;
  double asymptotic = 1e-6;
};

inline const std::vector<std::string> kExperiments = {"bergman", "rates",    "lemmas",  "geodesic",
                                                      "titerate", "kenergy", "theorem1"};

struct ExperimentConfig {
  std::string model = "CP1";
  int resolution = 40;
  ModelLimits limits;
  std::vector<PotentialSpec> suite;
  std::vector<int> k_list;
  std::vector<std::string> experiments;
  std::optional<std::uint64_t> seed;
  Tolerances tol;
  std::string output_dir = "kq-out";
  bool cache_enabled = true;
  std::string cache_dir;  // empty: $KQ_CACHE_DIR, then <output_dir>/cache
  int t_order = 16;
  // geodesic
  std::optional<PotentialSpec> geodesic_base;  // default: first non-trivial suite entry
  int geodesic_samples = 10;
  int geodesic_points = 21;
  // lemmas
  int random_pairs = 20;
  // titerate
  int titerate_iterations = 50;
  double titerate_perturbation = 0.1;

  nlohmann::json to_json() const;
  /// FNV-1a of the canonical JSON form.
  std::string hash() const;
  /// Throws ConfigError or CapabilityError naming the offending field.
  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig default_config();
/// Experiments available on a model (kenergy and theorem1 need CP1).
std::vector<std::string> applicable_experiments(const std::string& model);

/// Experiments drawing random directions or pairs.
bool experiment_needs_seed(const std::string& name);

}  // namespace kq::harness
