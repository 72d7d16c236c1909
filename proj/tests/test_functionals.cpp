#include <cmath>
#include <random>

#include "doctest.h"
#include "kq/functionals.hpp"
#include "kq/numerics.hpp"

using namespace kq;

namespace {

const Model& cp1() {
  static const Model m = Model::build("CP1", 20);
  return m;
}

const Model& cp2() {
  static const Model m = Model::build("CP2_toric", 6);
  return m;
}

MetricLevelK level_metric(const Model& m, const Potential& p, int k, double shift = 0.0) {
  return scale_metric(power_metric(m, p, k), -shift);
}

double nu_closed_form(const Model& m, const Potential& p) {
  const PotentialField f = p.evaluate(m);
  std::vector<double> v(m.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = 1.0 + f.hess[i];
    v[i] = F * std::log(F) + f.value[i] * f.hess[i];
  }
  return m.integrate(v);
}

std::vector<double> random_lambda(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> l(n);
  for (double& x : l) x = u(rng);
  return l;
}

}  // namespace

TEST_CASE("Aubin-Yau anchor, constants and scaling") {
  MetricLevelK m{3, Potential::constant(1.0).evaluate(cp1())};
  CHECK(aubin_yau(cp1(), m) == doctest::Approx(-3.0).epsilon(1e-13));
  CHECK(aubin_yau(cp1(), power_metric(cp1(), Potential::zero(), 5)) == 0.0);
  const MetricLevelK h = power_metric(cp1(), Potential::legendre(2, 0.3), 4);
  const double c = 0.7;
  CHECK(aubin_yau(cp1(), scale_metric(h, c)) - aubin_yau(cp1(), h) == doctest::Approx(c * 4.0).epsilon(1e-12));
  const MetricLevelK h2 = power_metric(cp2(), Potential::toric_mobius(1.3, 0.7), 3);
  CHECK(aubin_yau(cp2(), scale_metric(h2, c)) - aubin_yau(cp2(), h2) == doctest::Approx(c * 9.0).epsilon(1e-12));
}

TEST_CASE("Aubin-Yau is path independent") {
  const int k = 4;
  const MetricLevelK m = power_metric(cp1(), Potential::legendre(2, 0.2), k);
  const double lin = aubin_yau(cp1(), m);
  const double two = aubin_yau(cp1(), m, PathSpec::two_leg());
  const PotentialField via = double(k) * (0.5 * (Potential::legendre(2, 0.2).evaluate(cp1()) +
                                                  Potential::legendre(1, 0.4).evaluate(cp1())));
  const double two_b = aubin_yau(cp1(), m, PathSpec::two_leg(via));
  const double fine = aubin_yau(cp1(), m, PathSpec::two_leg(via, 32, 4));
  CHECK(std::abs(lin - two) < 1e-8);
  CHECK(std::abs(lin - two_b) < 1e-8);
  CHECK(std::abs(two_b - fine) < 1e-8);
  // Moebius family path at level k.
  const MetricLevelK mm = power_metric(cp1(), Potential::mobius(1.8), k);
  CHECK(std::abs(aubin_yau(cp1(), mm) - aubin_yau(cp1(), mm, PathSpec::family(1.8))) < 1e-8);
  CHECK_THROWS_AS(aubin_yau(cp1(), m, PathSpec::family(1.8)), ArgumentError);
  // CP2 two-leg.
  const MetricLevelK m2 = power_metric(cp2(), Potential::toric_bump(2.0), 3);
  CHECK(std::abs(aubin_yau(cp2(), m2) - aubin_yau(cp2(), m2, PathSpec::two_leg())) < 1e-8);
}

TEST_CASE("Aubin-Yau is convex along h e^{-t psi}") {
  const int k = 5;
  const MetricLevelK base = power_metric(cp1(), Potential::legendre(3, 0.1), k);
  const PotentialField dir = double(k) * Potential::legendre(2, 0.2).evaluate(cp1());
  std::vector<double> vals;
  for (int j = 0; j <= 10; ++j) {
    MetricLevelK m = base;
    m.psi = base.psi + (0.1 * j) * dir;
    vals.push_back(aubin_yau(cp1(), m));
  }
  for (int j = 1; j < 10; ++j) CHECK(vals[j + 1] - 2 * vals[j] + vals[j - 1] >= -1e-8);
}

TEST_CASE("P~ closed form and scale invariance") {
  const int k = 3;
  const MetricLevelK m = power_metric(cp1(), Potential::zero(), k);
  double expect = 0.0;
  for (int a = 0; a <= k; ++a) expect += std::log(1.0 / binomial(k, a));
  CHECK(p_tilde(cp1(), m, hilb(cp1(), m)) == doctest::Approx(expect / 4.0).epsilon(1e-13));
  for (const Potential& p : {Potential::legendre(2, 0.3), Potential::mobius(1.5)}) {
    const MetricLevelK h = power_metric(cp1(), p, 6);
    const GramMatrix g = hilb(cp1(), h);
    const double c = 0.7;
    CHECK(std::abs(p_tilde(cp1(), scale_metric(h, c), g.scaled(std::exp(c))) - p_tilde(cp1(), h, g)) < 1e-10);
  }
  const MetricLevelK h = power_metric(cp2(), Potential::toric_bump(1.5), 4);
  const GramMatrix g = hilb(cp2(), h);
  CHECK(std::abs(p_tilde(cp2(), scale_metric(h, -0.4), g.scaled(std::exp(-0.4))) - p_tilde(cp2(), h, g)) < 1e-10);
}

TEST_CASE("K-energy") {
  CHECK(k_energy(cp1(), Potential::zero()) == 0.0);
  SUBCASE("closed form oracle") {
    for (const Potential& p : {Potential::legendre(2, 0.3), Potential::legendre(3, 0.15), Potential::legendre(1, 0.1)}) {
      const double nu = k_energy(cp1(), p);
      CHECK(nu == doctest::Approx(nu_closed_form(cp1(), p)).epsilon(1e-9));
      CHECK(nu > 0.0);
    }
  }
  SUBCASE("Moebius orbit is critical") {
    const Potential p = Potential::mobius(2.0);
    CHECK(std::abs(k_energy(cp1(), p, PathSpec::family(2.0))) < 1e-8);
    CHECK(std::abs(k_energy(cp1(), p)) < 1e-8);
  }
  SUBCASE("path independence and refinement") {
    const Potential p = Potential::legendre(2, 0.3);
    const PotentialField via = 0.5 * (p.evaluate(cp1()) + Potential::legendre(1, 0.4).evaluate(cp1()));
    const double lin = k_energy(cp1(), p);
    CHECK(std::abs(lin - k_energy(cp1(), p, PathSpec::two_leg(via))) < 1e-8);
    const Model fine = Model::build("CP1", 80);
    CHECK(std::abs(lin - k_energy(fine, p, PathSpec::linear(32, 4))) < 1e-8);
  }
  CHECK_THROWS_AS(k_energy(cp2(), Potential::zero()), UnsupportedError);
}

TEST_CASE("L_k differences") {
  CHECK(l_functional_difference(cp1(), Potential::zero(), 6) == 0.0);
  CHECK(std::abs(l_functional_difference(cp1(), Potential::constant(1.7), 6)) < 1e-10);
  CHECK(std::abs(l_functional_difference(cp2(), Potential::constant(-0.4), 4)) < 1e-10);
}

TEST_CASE("geodesic functional") {
  const int k = 5;
  SUBCASE("zero direction") {
    const GeodesicSpec spec = GeodesicSpec::make(reference_gram(cp1(), k), std::vector<double>(k + 1, 0.3));
    const GeodesicResult r = f_geodesic(cp1(), spec);
    for (double f : r.f) CHECK(f == doctest::Approx(r.f[0]).epsilon(1e-13));
    CHECK(std::abs(r.fprime_integral) < 1e-13);
  }
  SUBCASE("stationary at the balanced base") {
    const GeodesicSpec spec = GeodesicSpec::make(reference_gram(cp1(), k), random_lambda(k + 1, 4));
    const GeodesicResult r = f_geodesic(cp1(), spec);
    CHECK(std::abs(r.fprime_integral) < 1e-10);
    CHECK(std::abs(r.fprime_surrogate) < 1e-8);
    for (double f : r.f) CHECK(f >= r.f[10] - 1e-10);
  }
  SUBCASE("convexity and derivative formula") {
    const BergmanSequence seq = bergman_sequence(cp1(), Potential::legendre(2, 0.2), k);
    for (unsigned seed : {1u, 2u, 3u}) {
      const GeodesicSpec spec = GeodesicSpec::make(seq.H_star, random_lambda(k + 1, seed));
      const GeodesicResult r = f_geodesic(cp1(), spec);
      CHECK(r.min_second_difference >= -1e-6);
      CHECK(r.fprime_surrogate == doctest::Approx(r.fprime_integral).epsilon(1e-6));
    }
  }
  SUBCASE("frame choice") {
    // Permuting the frame together with the direction gives the same Gram path.
    const GramMatrix base = bergman_sequence(cp1(), Potential::legendre(3, 0.1), k).H_star;
    const std::vector<double> l = random_lambda(k + 1, 9);
    const GeodesicSpec a = GeodesicSpec::make(base, l);
    ComplexMatrix perm = ComplexMatrix::Zero(k + 1, k + 1);
    std::vector<double> lp(k + 1);
    for (int i = 0; i <= k; ++i) {
      perm(i, k - i) = std::polar(1.0, 0.3 * i);
      lp[i] = l[k - i];
    }
    const GeodesicSpec b = GeodesicSpec::make(base, lp, perm * base.orthonormal_frame());
    for (double s : {-0.7, 0.4, 1.0}) CHECK(std::abs(f_value(cp1(), a, s) - f_value(cp1(), b, s)) < 1e-10);
  }
  SUBCASE("traceless direction enforced") {
    GeodesicSpec spec = GeodesicSpec::make(reference_gram(cp1(), k), random_lambda(k + 1, 5));
    spec.lambda_hat[0] += 1.0;
    CHECK_THROWS_AS(geodesic_gram(spec, 0.5), ArgumentError);
  }
  SUBCASE("CP2") {
    const GramMatrix base = bergman_sequence(cp2(), Potential::toric_bump(2.0), 3).H_star;
    const GeodesicSpec spec = GeodesicSpec::make(base, random_lambda(base.size(), 6));
    const GeodesicResult r = f_geodesic(cp2(), spec);
    CHECK(r.min_second_difference >= -1e-6);
    CHECK(r.fprime_surrogate == doctest::Approx(r.fprime_integral).epsilon(1e-6));
  }
}

TEST_CASE("Lemma conv1 sandwich") {
  const int k = 6;
  const MetricLevelK m = power_metric(cp1(), Potential::legendre(2, 0.2), k);
  const Conv1Slack same = lemma_conv1_check(cp1(), m, m);
  CHECK(same.lower == 0.0);
  CHECK(same.upper == 0.0);
  const Conv1Slack c = lemma_conv1_check(cp1(), m, scale_metric(m, -0.8));
  CHECK(std::abs(c.lower) < 1e-10);
  CHECK(std::abs(c.upper) < 1e-10);
  const Conv1Slack g = lemma_conv1_check(cp1(), m, level_metric(cp1(), Potential::mobius(1.6), k, 0.2));
  CHECK(g.lower >= -1e-8);
  CHECK(g.upper >= -1e-8);
  CHECK(g.lower + g.upper > 1e-6);
  const Conv1Slack t = lemma_conv1_check(cp2(), power_metric(cp2(), Potential::toric_bump(2.0), 4),
                                         power_metric(cp2(), Potential::toric_mobius(1.4, 0.8), 4));
  CHECK(t.lower >= -1e-8);
  CHECK(t.upper >= -1e-8);
}

TEST_CASE("Lemma step1 and step3") {
  CHECK(std::abs(lemma_step1_gap(cp1(), Potential::zero(), 7)) < 1e-10);
  CHECK(std::abs(lemma_step1_gap(cp1(), Potential::constant(0.9), 7)) < 1e-10);
  for (int k : {4, 9}) CHECK(lemma_step1_gap(cp1(), Potential::legendre(2, 0.3), k) >= -1e-8);
  CHECK(lemma_step1_gap(cp2(), Potential::toric_bump(2.0), 4) >= -1e-8);
  CHECK(lemma_step3_gap(cp1(), Potential::zero(), 8) < 1e-10);
  CHECK(lemma_step3_gap(cp1(), Potential::mobius(2.0), 8) < 1e-10);
  CHECK(lemma_step3_gap(cp1(), Potential::legendre(2, 0.2), 8) > 1e-6);
}

TEST_CASE("Lemma step2") {
  const int k = 6;
  const Step2Report same = lemma_step2_check(cp1(), Potential::zero(), Potential::zero(), k);
  CHECK(std::abs(same.gap) < 1e-10);
  CHECK(same.lambda_hat_max < 1e-10);
  const Step2Report r = lemma_step2_check(cp1(), Potential::legendre(2, 0.3), Potential::zero(), k);
  CHECK(std::abs(r.fprime_integral) < 1e-10);  // balanced base
  CHECK(r.convexity_slack >= -1e-8);
  CHECK(r.lambda_hat_max > 0.0);
  // f(1) - f(0) reproduces the P~ difference directly.
  const BergmanSequence a = bergman_sequence(cp1(), Potential::legendre(2, 0.3), k);
  const GramMatrix& hk = a.H_star;
  const GramMatrix hs = reference_gram(cp1(), k);
  const double direct = p_tilde(cp1(), fs(cp1(), hk), hk) - p_tilde(cp1(), fs(cp1(), hs), hs);
  CHECK(r.gap == doctest::Approx(direct).epsilon(1e-9));
  const Step2Report g = lemma_step2_check(cp1(), Potential::legendre(3, 0.15), Potential::legendre(2, 0.2), k);
  CHECK(g.convexity_slack >= -1e-8);
}

TEST_CASE("theorem chain") {
  const Model m = Model::build("CP1", 12);
  const FunctionalReport z = theorem1_suite(m, {Potential::zero()}, {4, 8});
  CHECK(z.failures.empty());
  CHECK(z.entries[0].nu == 0.0);
  for (const auto& row : z.entries[0].rows) {
    CHECK(std::abs(row.l_diff) < 1e-10);
    CHECK(std::abs(row.step1_gap) < 1e-10);
    CHECK(std::abs(row.step2_gap) < 1e-10);
    CHECK(std::abs(row.chain) < 1e-10);
  }
  const FunctionalReport r = theorem1_suite(m, {Potential::mobius(2.0), Potential::legendre(2, 0.3)}, {4, 8});
  CHECK(r.failures.empty());
  CHECK(std::abs(r.entries[0].nu) < 1e-6);
  CHECK(r.entries[1].nu > 0.0);
  CHECK(r.entries[1].chain_c >= 0.0);
  CHECK_THROWS_AS(theorem1_suite(cp2(), {Potential::zero()}, {2}), UnsupportedError);
}
