#include <cmath>
#include <random>

#include "doctest.h"
#include "kq/numerics.hpp"
#include "kq/quantization.hpp"

using namespace kq;

namespace {

const Model& cp1() {
  static const Model m = Model::build("CP1", 12);
  return m;
}

const Model& cp2() {
  static const Model m = Model::build("CP2_toric", 8);
  return m;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

ComplexMatrix random_unitary(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
  Eigen::HouseholderQR<ComplexMatrix> qr(a);
  return qr.householderQ() * ComplexMatrix::Identity(n, n);
}

// Random Hermitian positive-definite Gram near the reference one.
GramMatrix random_gram(const Model& m, int k, unsigned seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  const GramMatrix ref = reference_gram(m, k);
  const int n = ref.size();
  ComplexMatrix p = ComplexMatrix::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p(i, j) += std::complex<double>(u(rng), u(rng));
  // Conjugating by P keeps positivity and scale.
  const ComplexMatrix s = ref.matrix().cwiseSqrt();
  return GramMatrix::make(k, s * p * p.adjoint() * s);
}

}  // namespace

TEST_CASE("section counts") {
  CHECK(section_count(cp1(), 5) == 6);
  CHECK(section_count(cp2(), 4) == 15);
  CHECK(SectionBasis(cp1(), 5).size() == 6);
  CHECK(SectionBasis(cp2(), 4).size() == 15);
  CHECK(SectionBasis(cp2(), 4).degree() == doctest::Approx(16.0));
  CHECK_THROWS_AS(SectionBasis(cp1(), 100), CapabilityError);
}

TEST_CASE("hilb of the reference metric is the closed-form Gram") {
  for (const Model* m : {&cp1(), &cp2()}) {
    for (int k : {1, 3, 7}) {
      const GramMatrix g = hilb(*m, power_metric(*m, Potential::zero(), k));
      const GramMatrix ref = reference_gram(*m, k);
      CHECK(g.is_diagonal());
      for (int a = 0; a < g.size(); ++a)
        CHECK(g.matrix()(a, a).real() == doctest::Approx(ref.matrix()(a, a).real()).epsilon(1e-12));
    }
  }
}

TEST_CASE("hilb scales with constants") {
  const int k = 4;
  const GramMatrix g0 = hilb(cp1(), power_metric(cp1(), Potential::mobius(1.3), k));
  const GramMatrix g1 = hilb(cp1(), scale_metric(power_metric(cp1(), Potential::mobius(1.3), k), 0.7));
  CHECK((g1.matrix() - std::exp(0.7) * g0.matrix()).norm() < 1e-12 * g0.matrix().norm());
}

TEST_CASE("FS inverts hilb at the reference metric") {
  for (const Model* m : {&cp1(), &cp2()}) {
    const int k = 5;
    const MetricLevelK f = fs(*m, reference_gram(*m, k));
    double sv = 0.0, sh = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) sv = std::max(sv, std::abs(f.psi.value[i]));
    for (double h : f.psi.hess) sh = std::max(sh, std::abs(h));
    CHECK(sv < 1e-12);
    CHECK(sh < 1e-9);
    // FS(e^c G) = e^{-c} FS(G), i.e. psi shifts by -c.
    const MetricLevelK fc = fs(*m, reference_gram(*m, k).scaled(std::exp(0.4)));
    for (std::size_t i = 0; i < m->size(); i += 17) CHECK(fc.psi.value[i] == doctest::Approx(-0.4).epsilon(1e-12));
  }
}

TEST_CASE("FS is invariant under unitary change of frame") {
  const int k = 6;
  const GramMatrix g = hilb(cp1(), power_metric(cp1(), Potential::legendre(2, 0.3), k));
  const MetricLevelK f0 = fs(cp1(), g);
  const ComplexMatrix frame = random_unitary(g.size(), 11) * g.orthonormal_frame();
  const MetricLevelK f1 = fs_from_frame(cp1(), k, frame);
  CHECK_FALSE(f1.psi.axisymmetric);  // exercises the general chart formula
  CHECK(sup_diff(f0.psi.value, f1.psi.value) < 1e-11);
  CHECK(sup_diff(f0.psi.hess, f1.psi.hess) < 1e-8);
}

TEST_CASE("general FS Hessian matches the spectral Laplacian") {
  const Model m = Model::build("CP1", 16);
  const int k = 4;
  const GramMatrix g = random_gram(m, k, 3, 0.15);
  CHECK_FALSE(g.is_diagonal());
  const MetricLevelK f = fs(m, g);
  // For n = 1 the relative Hessian is the reference Laplacian of psi.
  const std::vector<double> lap = m.sht().laplacian(f.psi.value);
  double err = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) err = std::max(err, std::abs(f.psi.hess[i] - lap[i]));
  CHECK(err < 1e-8);
  CHECK_THROWS_AS(fs(cp2(), random_gram(cp2(), 2, 3, 0.1)), UnsupportedError);
}

TEST_CASE("general hilb agrees with the torus-invariant fast path") {
  const int k = 5;
  MetricLevelK m = power_metric(cp1(), Potential::mobius(1.4), k);
  const GramMatrix fast = hilb(cp1(), m);
  m.psi.axisymmetric = false;
  const GramMatrix slow = hilb(cp1(), m);
  CHECK((fast.matrix() - slow.matrix()).norm() < 1e-12 * fast.matrix().norm());
}

TEST_CASE("Bergman kernel closed forms") {
  for (int k : {1, 2, 5, 9}) {
    const ScalarField r = bergman_kernel(cp1(), Potential::zero(), k);
    for (double v : r.values) CHECK(v == doctest::Approx((k + 1.0) / k).epsilon(1e-12));
  }
  const ScalarField r3 = bergman_kernel(cp2(), Potential::zero(), 3);
  for (double v : r3.values) CHECK(v == doctest::Approx(20.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("Bergman kernel integrates to N_k n! / k^n") {
  const int k = 6;
  for (const Potential& p : {Potential::mobius(1.5), Potential::legendre(2, 0.3)}) {
    const PotentialField f = p.evaluate(cp1());
    const ScalarField r = bergman_kernel(cp1(), f, k);
    std::vector<double> v(cp1().size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = r.values[i] * f.volume_ratio(i, 1);
    CHECK(cp1().integrate(v) == doctest::Approx(7.0 / 6.0).epsilon(1e-11));
  }
  const PotentialField f = Potential::toric_mobius(1.2, 0.8).evaluate(cp2());
  const ScalarField r = bergman_kernel(cp2(), f, 3);
  std::vector<double> v(cp2().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = r.values[i] * f.volume_ratio(i, 1);
  CHECK(cp2().integrate(v) == doctest::Approx(20.0 / 9.0).epsilon(1e-11));
}

TEST_CASE("Bergman kernel is invariant under constant shifts") {
  const ScalarField a = bergman_kernel(cp1(), Potential::legendre(3, 0.2), 5);
  const ScalarField b = bergman_kernel(cp1(), Potential::legendre(3, 0.2) + Potential::constant(2.5), 5);
  CHECK(sup_diff(a.values, b.values) < 1e-12);
}

TEST_CASE("FS metrics are balanced") {
  const int k = 5;
  CHECK(bergman_defect(cp1(), power_metric(cp1(), Potential::zero(), k)) < 1e-10);
  // Moebius potentials are SL2 pullbacks of the reference metric, hence balanced.
  CHECK(bergman_defect(cp1(), power_metric(cp1(), Potential::mobius(1.7), k)) < 1e-10);
  CHECK(bergman_defect(cp1(), power_metric(cp1(), Potential::legendre(2, 0.3), k)) > 1e-4);
}

TEST_CASE("T-iteration") {
  const int k = 5;
  SUBCASE("reference Gram is a fixed point") {
    const TIterationResult r = t_iterate(cp1(), reference_gram(cp1(), k), 3, 1e-10);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
  }
  SUBCASE("defects contract from a perturbed start") {
    const GramMatrix g0 = hilb(cp1(), power_metric(cp1(), Potential::legendre(2, 0.3), k));
    const TIterationResult r = t_iterate(cp1(), g0, 8, 1e-14);
    REQUIRE(r.defect_history.size() >= 4);
    for (std::size_t j = 1; j < r.defect_history.size(); ++j) CHECK(r.defect_history[j] < r.defect_history[j - 1]);
    for (double ld : r.log_det_history) CHECK(std::abs(ld) < 1e-10);
  }
  SUBCASE("non-diagonal start") {
    const TIterationResult r = t_iterate(cp1(), random_gram(cp1(), 3, 7, 0.1), 40, 1e-9);
    CHECK(r.converged);
  }
}

TEST_CASE("Gram positivity") {
  ComplexMatrix m = ComplexMatrix::Identity(3, 3);
  m(0, 1) = m(1, 0) = 1.0;
  CHECK_THROWS_AS(GramMatrix::make(1, m), PositivityError);
  Eigen::VectorXd d(2);
  d << 1.0, -1.0;
  CHECK_THROWS_AS(GramMatrix::diagonal(1, d), PositivityError);
  // Badly scaled but positive: accepted.
  const GramMatrix g = reference_gram(Model::build("CP1", 40), 40);
  CHECK(g.log_det() < 0.0);
}
