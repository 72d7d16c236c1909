#include <cmath>

#include "doctest.h"
#include "kq/asymptotics.hpp"

using namespace kq;

namespace {

std::vector<std::pair<int, double>> series(int k0, int k1, auto&& fn) {
  std::vector<std::pair<int, double>> v;
  for (int k = k0; k <= k1; ++k) v.emplace_back(k, fn(static_cast<double>(k)));
  return v;
}

}  // namespace

TEST_CASE("fit_decay recovers power laws") {
  const DecayFit f = fit_decay(series(5, 40, [](double k) { return 5.0 / (k * k); }));
  CHECK(f.C == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(f.p == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(f.k_min == 5);
  CHECK(f.k_max == 40);
  const DecayFit g = fit_decay(series(10, 40, [](double k) { return 3.0 / k + 7.0 / (k * k); }));
  CHECK(g.p > -1.3);
  CHECK(g.p < -1.0);
}

TEST_CASE("fit_decay is scale equivariant") {
  const auto base = series(8, 30, [](double k) { return std::exp(-0.1 * k) + 1.0 / k; });
  auto scaled = base;
  for (auto& [k, v] : scaled) v *= 13.0;
  const DecayFit a = fit_decay(base), b = fit_decay(scaled);
  CHECK(b.C == doctest::Approx(13.0 * a.C).epsilon(1e-12));
  CHECK(b.p == doctest::Approx(a.p).epsilon(1e-12));
}

TEST_CASE("fit_decay edge cases") {
  const DecayFit z = fit_decay(series(2, 8, [](double) { return 0.0; }));
  CHECK(z.exact);
  CHECK(z.describe() == "exact (below noise floor)");
  CHECK_THROWS_AS(fit_decay({{1, 1.0}, {2, 0.5}, {3, 0.3}}), ArgumentError);
  CHECK_THROWS_AS(fit_decay({{1, 1.0}, {3, 0.5}, {2, 0.3}, {4, 0.2}}), ArgumentError);
  // Points under the floor are skipped.
  const DecayFit s = fit_decay({{1, 1.0}, {2, 1e-16}, {3, 1.0 / 9}, {4, 1.0 / 16}, {5, 1.0 / 25}});
  CHECK(s.used == 4);
  CHECK(s.p == doctest::Approx(-2.0));
}

TEST_CASE("expansion residuals") {
  const Model m = Model::build("CP1", 24);
  for (const auto& [k, r] : expansion_residual(m, Potential::zero(), {2, 8, 24}, 1)) CHECK(r < 1e-12);
  for (const auto& [k, r] : expansion_residual(m, Potential::zero(), {2, 8}, 0)) CHECK(r == doctest::Approx(1.0 / k));
  const auto r0 = expansion_residual(m, Potential::legendre(2, 0.2), {12, 24}, 0);
  const auto r1 = expansion_residual(m, Potential::legendre(2, 0.2), {12, 24}, 1);
  for (int i = 0; i < 2; ++i) CHECK(r1[i].second < r0[i].second);
  CHECK(r0[1].second < r0[0].second);
  CHECK(r1[1].second < 0.35 * r1[0].second);
  const Model p = Model::build("CP2_toric", 6);
  CHECK_THROWS_AS(expansion_residual(p, Potential::zero(), {3}, 1), UnsupportedError);
  for (const auto& [k, r] : expansion_residual(p, Potential::zero(), {3, 6}, 0))
    CHECK(r == doctest::Approx((k + 1.0) * (k + 2.0) / (k * k) - 1.0).epsilon(1e-12));
  CHECK_THROWS_AS(expansion_residual(m, Potential::zero(), {3}, 2), ArgumentError);
}

TEST_CASE("Bergman metric rates") {
  const Model m = Model::build("CP1", 24);
  for (const MetricRate& r : bergman_metric_rate(m, Potential::zero(), {3, 12, 24})) {
    CHECK(r.potential < 1e-12);
    CHECK(r.form < 1e-10);
  }
  for (const MetricRate& r : bergman_metric_rate(m, Potential::mobius(1.7), {3, 12})) {
    CHECK(r.potential < 1e-12);
    CHECK(r.form < 1e-10);
  }
  const auto v = bergman_metric_rate(m, Potential::legendre(2, 0.2), {8, 16});
  CHECK(v[1].potential < 0.5 * v[0].potential);
  const Model p = Model::build("CP2_toric", 8);
  for (const MetricRate& r : bergman_metric_rate(p, Potential::zero(), {2, 8})) {
    CHECK(r.potential < 1e-12);
    CHECK(r.form < 1e-9);
  }
  const auto t = bergman_metric_rate(p, Potential::toric_bump(2.0), {4, 8});
  CHECK(t[1].potential < t[0].potential);
}
