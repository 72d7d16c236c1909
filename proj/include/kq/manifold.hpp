#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kq/errors.hpp"
#include "kq/spherical.hpp"

namespace kq {

enum class ModelKind { CP1, CP2Toric };

std::string to_string(ModelKind kind);

struct ModelLimits {
  int max_resolution = 200;
  std::size_t max_nodes = 2'000'000;
};

/// Product quadrature rule; weights integrate against omega_ref^n and sum to V.
///
/// CP1: coord0 = u = cos(theta) at Gauss-Legendre nodes, coord1 = azimuth
/// (uniform), node index = i * nphi + j.
/// CP2_toric: coord0 = x1, coord1 = x2, moment coordinates on the simplex
/// x1, x2 >= 0, x1 + x2 <= 1 (collapsed Gauss-Legendre product).
struct QuadratureRule {
  std::vector<double> coord0;
  std::vector<double> coord1;
  std::vector<double> weights;
  int capability_k = 0;
  int n_outer = 0;  // ntheta (CP1) or n_s (CP2)
  int n_inner = 0;  // nphi (CP1) or n_t (CP2)
};

/// Real values on the quadrature nodes of one model grid.
struct ScalarField {
  std::vector<double> values;
  std::uint64_t grid_id = 0;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double sup_norm() const;
  double min() const;
  double max() const;
};

/// A Kahler potential sampled on the grid: its value and its relative complex
/// Hessian K = ((sqrt(-1)/2pi) ddbar psi) / omega_ref, stored as an n x n
/// block per node (n = 1: the Laplacian trace; n = 2: M^{-1} Hess_rho psi in
/// logarithmic torus coordinates). For a metric on L^k written h_ref^k e^{-psi},
/// the curvature ratio c1(L^k, h)^n / omega_ref^n is det(k I + K).
struct PotentialField {
  std::uint64_t grid_id = 0;
  int dim = 1;
  std::vector<double> value;
  std::vector<double> hess;
  bool axisymmetric = true;

  std::size_t size() const { return value.size(); }
  /// det(level I + K) at node i.
  double volume_ratio(std::size_t i, double level) const;
  /// level I + K positive definite at node i.
  bool positive(std::size_t i, double level) const;

  PotentialField& operator+=(const PotentialField& other);
  PotentialField& operator*=(double s);
  friend PotentialField operator+(PotentialField a, const PotentialField& b) { return a += b; }
  friend PotentialField operator*(double s, PotentialField a) { return a *= s; }
};

class Model;

/// Built-in potential families with closed-form complex Hessians.
namespace family {
struct Constant {
  double c = 0.0;
};
/// CP1: log((1 + lambda^2 |z|^2) / (1 + |z|^2)), pullback of omega_FS by z -> lambda z.
struct Mobius {
  double lambda = 1.0;
};
/// CP1: (eps / 4) P_l(cos theta); omega_phi / omega = 1 - eps l (l + 1) P_l / 4.
struct Legendre {
  int l = 1;
  double eps = 0.0;
};
/// CP2: log(x0 + a1^2 x1 + a2^2 x2), pullback of omega_FS by a diagonal automorphism.
struct ToricMobius {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
};
/// CP2: eps * x0 x1 x2 in moment coordinates.
struct ToricBump {
  double eps = 0.0;
};
}  // namespace family

using Atom = std::variant<family::Constant, family::Mobius, family::Legendre, family::ToricMobius, family::ToricBump>;

/// A potential phi relative to the reference metric, as a finite linear
/// combination of family members. Positivity of omega_phi is checked when the
/// potential is evaluated on a model.
class Potential {
 public:
  struct Term {
    double coef;
    Atom atom;
  };

  Potential() = default;
  static Potential zero() { return {}; }
  static Potential constant(double c);
  static Potential mobius(double lambda);
  static Potential legendre(int l, double eps);
  static Potential toric_mobius(double lambda1, double lambda2);
  static Potential toric_bump(double eps);

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  Potential& operator+=(const Potential& other);
  friend Potential operator+(Potential a, const Potential& b) { return a += b; }
  friend Potential operator*(double s, Potential p);

  /// Samples value and Hessian; throws PositivityError naming the first node
  /// where omega_phi fails to be positive.
  PotentialField evaluate(const Model& model) const;
  PotentialField evaluate_unchecked(const Model& model) const;

  /// Canonical text form, stable across runs (used in reports and cache keys).
  std::string label() const;

 private:
  std::vector<Term> terms_;
};

/// Polarized model (X, L, omega_FS) with its quadrature grid.
class Model {
 public:
  static Model build(std::string_view name, int resolution_k, const ModelLimits& limits = {});

  ModelKind kind() const { return kind_; }
  std::string name() const { return to_string(kind_); }
  int dim() const { return dim_; }
  double volume() const { return 1.0; }
  /// Average scalar curvature n c1(X).[w]^{n-1} / [w]^n.
  double sbar() const { return dim_ == 1 ? 2.0 : 6.0; }
  int resolution() const { return resolution_; }
  const QuadratureRule& grid() const { return *grid_; }
  std::size_t size() const { return grid_->weights.size(); }
  std::uint64_t grid_id() const { return grid_id_; }
  /// Text that changes whenever the grid changes (cache key component).
  std::string signature() const;

  double integrate(std::span<const double> f) const;
  double integrate(const ScalarField& f) const;

  /// Throws CapabilityError unless 1 <= k <= capability.
  void check_level(int k) const;

  /// Moment coordinates x_j = |Z_j|^2 for homogeneous unit coordinates Z;
  /// j = 0..n, summing to 1 at every node.
  double moment(std::size_t node, int j) const { return moments_[j][node]; }
  /// CP1 only: homogeneous unit coordinates (Z0 real >= 0, Z1 complex).
  double z0(std::size_t node) const { return moments_[0][node] >= 0 ? std::sqrt(moments_[0][node]) : 0.0; }
  std::complex<double> z1(std::size_t node) const;
  double azimuth(std::size_t node) const { return grid_->coord1[node]; }
  double cos_theta(std::size_t node) const { return grid_->coord0[node]; }

  const SphericalTransform& sht() const;

  ScalarField make_field(std::vector<double> values) const;
  void check_field(const ScalarField& f) const;
  void check_field(const PotentialField& f) const;

 private:
  Model() = default;

  ModelKind kind_ = ModelKind::CP1;
  int dim_ = 1;
  int resolution_ = 0;
  std::uint64_t grid_id_ = 0;
  std::shared_ptr<const QuadratureRule> grid_;
  std::vector<std::vector<double>> moments_;
  std::shared_ptr<const SphericalTransform> sht_;
};

/// Volume ratio F = omega_phi^n / omega_ref^n.
ScalarField ma_ratio(const Model& model, const Potential& phi);
ScalarField ma_ratio(const Model& model, const PotentialField& phi);

/// Scalar curvature S(omega_phi) = (S_ref - Delta_ref log F) / F (CP1 only).
ScalarField scalar_curvature(const Model& model, const Potential& phi);
ScalarField scalar_curvature(const Model& model, const PotentialField& phi);

/// Delta_{omega_phi} f = ((sqrt(-1)/2pi) ddbar f) / omega_phi, spectral (CP1 only).
ScalarField laplacian(const Model& model, const PotentialField& metric, const ScalarField& f);
ScalarField laplacian(const Model& model, const Potential& metric, const ScalarField& f);

/// d phi_lambda / d log(lambda) for the CP1 Mobius family.
PotentialField mobius_log_derivative(const Model& model, double lambda);

}  // namespace kq
