#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <vector>

#include "kq/manifold.hpp"

namespace kq {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Monomial basis of H^0(X, L^k): z^a on CP1, x^a y^b on CP2.
class SectionBasis {
 public:
  SectionBasis(const Model& model, int k);

  int level() const { return k_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  /// d_k = V k^n.
  double degree() const;
  const std::vector<std::array<int, 2>>& exponents() const { return exponents_; }

  /// |s_alpha|^2_{h_ref^k} at a node (real, valid on both models).
  double norm2(std::size_t node, int alpha) const;
  /// CP1 only: s_alpha / h_ref^{k/2} as a complex number in unit homogeneous coordinates.
  std::complex<double> value(std::size_t node, int alpha) const;

 private:
  const Model* model_;
  int k_;
  std::vector<std::array<int, 2>> exponents_;
};

SectionBasis section_basis(const Model& model, int k);

/// Hermitian positive-definite inner product on H^0(X, L^k), stored in the
/// monomial basis: G(a, b) = H(s_a, s_b), linear in the first slot.
class GramMatrix {
 public:
  /// Symmetrizes and checks positivity. The eigenvalue test runs on the
  /// Jacobi-scaled matrix D^{-1/2} G D^{-1/2}: monomial norms alone span many
  /// orders of magnitude at large k.
  static GramMatrix make(int k, ComplexMatrix m);
  static GramMatrix diagonal(int k, const Eigen::VectorXd& d);

  int level() const { return k_; }
  int size() const { return static_cast<int>(m_.rows()); }
  const ComplexMatrix& matrix() const { return m_; }
  bool is_diagonal() const { return diagonal_; }

  double log_det() const;
  ComplexMatrix inverse() const;
  /// Rows give a G-orthonormal basis: T G T^dagger = I (inverse Cholesky factor).
  ComplexMatrix orthonormal_frame() const;
  GramMatrix scaled(double s) const;

  static constexpr double kPositivityTolerance = 1e-12;

 private:
  GramMatrix(int k, ComplexMatrix m, bool diag) : k_(k), m_(std::move(m)), diagonal_(diag) {}
  int k_;
  ComplexMatrix m_;
  bool diagonal_;
};

/// A metric h_ref^k e^{-psi} on L^k.
struct MetricLevelK {
  int k = 1;
  PotentialField psi;
};

/// h^k for h = h_ref e^{-phi}: psi = k phi.
MetricLevelK power_metric(const Model& model, const Potential& phi, int k);
MetricLevelK power_metric(const Model& model, const PotentialField& phi, int k);
/// Throws PositivityError unless c1(L^k, m) > 0 at every node.
void check_metric(const Model& model, const MetricLevelK& m);
/// e^{c} m (psi -> psi - c).
MetricLevelK scale_metric(MetricLevelK m, double c);

GramMatrix hilb(const Model& model, const MetricLevelK& m);
MetricLevelK fs(const Model& model, const GramMatrix& g);
/// FS metric from an explicit orthonormal frame (rows = coefficient vectors).
MetricLevelK fs_from_frame(const Model& model, int k, const ComplexMatrix& frame);

/// sum_alpha |s_alpha|^2_m for a G-orthonormal basis {s_alpha}.
ScalarField orthonormal_density(const Model& model, const MetricLevelK& m, const GramMatrix& g);

/// rho_k(omega_phi) = (N_k n! / (V k^n)) sum |s_alpha|^2_{h^k}.
ScalarField bergman_kernel(const Model& model, const Potential& phi, int k);
ScalarField bergman_kernel(const Model& model, const PotentialField& phi, int k);

struct BergmanSequence {
  MetricLevelK h_star;         // FS(Hilb(h_inf^k))
  ScalarField omega_star;      // c1(L^k, h_star)^n / omega_ref^n
  GramMatrix H_star;           // Hilb(h_star)
  MetricLevelK h_star2;        // FS(H_star)
  GramMatrix hilb_power;       // Hilb(h_inf^k)
};

BergmanSequence bergman_sequence(const Model& model, const Potential& phi_inf, int k);

/// || sum |s_alpha|^2_m - 1 ||_inf for a Hilb(m)-orthonormal basis.
double bergman_defect(const Model& model, const MetricLevelK& m);
double almost_balanced_defect(const Model& model, const Potential& phi_inf, int k);

struct TIterationResult {
  GramMatrix fixed;
  std::vector<double> defect_history;   // defect of iterate j, j = 0..iterations
  std::vector<double> log_det_history;  // log det of iterate j (0 after normalization)
  int iterations = 0;
  bool converged = false;
};

/// G_{j+1} = Hilb(FS(G_j)), renormalized to det = 1.
TIterationResult t_iterate(const Model& model, const GramMatrix& g0, int max_iter, double tol);

/// Gram of h_ref^k in the monomial basis: diag(1 / C(k, a)) or diag(1 / multinomial).
GramMatrix reference_gram(const Model& model, int k);

/// Hilbert-space dimension N_k.
int section_count(const Model& model, int k);

}  // namespace kq
