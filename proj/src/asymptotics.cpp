#include "kq/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kq/numerics.hpp"
#include "kq/quantization.hpp"

namespace kq {

std::string DecayFit::describe() const {
  if (exact) return "exact (below noise floor)";
  char buf[160];
  std::snprintf(buf, sizeof buf, "C=%.6g p=%.4f r2=%.4f k=[%d,%d] n=%d", C, p, r2, k_min, k_max, used);
  return buf;
}

DecayFit fit_decay(const std::vector<std::pair<int, double>>& points) {
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].first <= points[i - 1].first) throw ArgumentError("fit_decay: k must be strictly increasing");
  std::vector<double> x, y;
  for (const auto& [k, v] : points) {
    if (k < 1) throw ArgumentError("fit_decay: k must be positive");
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("fit_decay: values must be finite and nonnegative");
    if (v > kNoiseFloor) {
      x.push_back(std::log(static_cast<double>(k)));
      y.push_back(std::log(v));
    }
  }
  DecayFit f;
  if (x.empty() && !points.empty()) {
    f.exact = true;
    f.k_min = points.front().first;
    f.k_max = points.back().first;
    return f;
  }
  if (x.size() < 4) throw ArgumentError("fit_decay: fewer than 4 usable points");
  const double n = static_cast<double>(x.size());
  const double mx = pairwise_sum(x) / n, my = pairwise_sum(y) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.p = sxy / sxx;
  f.C = std::exp(my - f.p * mx);
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (my + f.p * (x[i] - mx));
    ssr += r * r;
  }
  f.r2 = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  f.used = static_cast<int>(x.size());
  f.k_min = static_cast<int>(std::lround(std::exp(x.front())));
  f.k_max = static_cast<int>(std::lround(std::exp(x.back())));
  return f;
}

std::vector<std::pair<int, double>> expansion_residual(const Model& model, const Potential& phi,
                                                       const std::vector<int>& ks, int order) {
  if (order != 0 && order != 1) throw ArgumentError("expansion order must be 0 or 1");
  if (order == 1 && model.kind() != ModelKind::CP1)
    throw UnsupportedError("first-order expansion needs scalar curvature, available on CP1 only");
  const PotentialField f = phi.evaluate(model);
  std::vector<double> s;
  if (order == 1) s = scalar_curvature(model, f).values;
  std::vector<std::pair<int, double>> out;
  for (int k : ks) {
    const ScalarField rho = bergman_kernel(model, f, k);
    double r = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      double a = 1.0;
      if (order == 1) a += s[i] / (2.0 * k);
      r = std::max(r, std::abs(rho.values[i] - a));
    }
    out.emplace_back(k, r);
  }
  return out;
}

namespace {

// Largest |eigenvalue| of an n x n block with real spectrum (similar to symmetric).
double block_norm(const double* a, int n) {
  if (n == 1) return std::abs(a[0]);
  const double tr = a[0] + a[3], det = a[0] * a[3] - a[1] * a[2];
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  return std::max(std::abs(0.5 * tr + disc), std::abs(0.5 * tr - disc));
}

}  // namespace

std::vector<MetricRate> bergman_metric_rate(const Model& model, const Potential& phi, const std::vector<int>& ks) {
  const PotentialField f = phi.evaluate(model);
  const int n = model.dim();
  std::vector<MetricRate> out;
  for (int k : ks) {
    const MetricLevelK hk = fs(model, hilb(model, power_metric(model, f, k)));
    MetricRate r;
    r.k = k;
    double d[4];
    for (std::size_t i = 0; i < model.size(); ++i) {
      r.potential = std::max(r.potential, std::abs(f.value[i] - hk.psi.value[i] / k));
      for (int j = 0; j < n * n; ++j) d[j] = hk.psi.hess[i * n * n + j] / k - f.hess[i * n * n + j];
      r.form = std::max(r.form, block_norm(d, n));
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace kq
