#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kq/manifold.hpp"

namespace kq {

/// value ~ C k^p by least squares in log-log coordinates.
struct DecayFit {
  double C = 0.0;
  double p = 0.0;
  double r2 = 0.0;
  int k_min = 0;
  int k_max = 0;
  int used = 0;
  bool exact = false;  // every value below the noise floor; C, p, r2 are not meaningful

  std::string describe() const;
};

inline constexpr double kNoiseFloor = 1e-14;

/// Points with value <= kNoiseFloor are dropped; at least four must remain.
DecayFit fit_decay(const std::vector<std::pair<int, double>>& points);

/// sup |rho_k - sum_{i <= order} A_i k^{-i}| with A_0 = 1, A_1 = S / 2 (order 1 needs CP1).
std::vector<std::pair<int, double>> expansion_residual(const Model& model, const Potential& phi,
                                                       const std::vector<int>& ks, int order);

struct MetricRate {
  int k = 0;
  double potential = 0.0;  // sup |log(h_k^{1/k} / h)|
  double form = 0.0;       // sup |(1/k) omega_k - omega_phi| relative to omega_ref
};

/// Convergence of the Bergman metrics h_k = FS(Hilb(h^k)), h = h_ref e^{-phi}.
std::vector<MetricRate> bergman_metric_rate(const Model& model, const Potential& phi, const std::vector<int>& ks);

}  // namespace kq
