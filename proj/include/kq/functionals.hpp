#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kq/manifold.hpp"
#include "kq/quantization.hpp"

namespace kq {

enum class PathKind { Linear, TwoLeg, Family };

/// A path of potentials from 0 to a given endpoint.
///   Linear: t * end.
///   TwoLeg: 0 -> via on [0, 1/2], via -> end on [1/2, 1]; via defaults to end/4 + 0.3.
///   Family: the CP1 Mobius family phi_{lambda^t} (endpoint must be mobius(lambda)).
struct PathSpec {
  PathKind kind = PathKind::Linear;
  std::optional<PotentialField> via;  // same level as the endpoint
  double family_lambda = 1.0;
  int t_order = 16;  // Gauss-Legendre points per panel
  int panels = 1;    // panels per leg

  static PathSpec linear(int t_order = 16, int panels = 1);
  static PathSpec two_leg(std::optional<PotentialField> via = {}, int t_order = 16, int panels = 1);
  static PathSpec family(double lambda, int t_order = 16, int panels = 1);
};

const char* to_string(PathKind k);

/// I_k(h_ref^k e^{-psi}) = -int_0^1 dt int psi_t' c1(L^k, h_t)^n, with I_k(h_ref^k) = 0.
double aubin_yau(const Model& model, const MetricLevelK& m, const PathSpec& path = {});
/// I_k(m1) - I_k(m0) along the segment m0 e^{-t (psi1 - psi0)}.
double aubin_yau_difference(const Model& model, const MetricLevelK& m0, const MetricLevelK& m1, int t_order = 16);

/// (1/N_k) log det G - I_k(m) / (V k^n), with det taken in the monomial basis.
double p_tilde(const Model& model, const MetricLevelK& m, const GramMatrix& g);

/// Mabuchi K-energy of omega_phi relative to omega_ref (CP1 only).
double k_energy(const Model& model, const Potential& phi, const PathSpec& path = {});
double k_energy(const Model& model, const PotentialField& phi, const PathSpec& path = {});

/// L_k(omega_phi) = P~_k(h^k e^{-k phi}, Hilb(h^k e^{-k phi})).
double l_functional(const Model& model, const Potential& phi, int k);
/// L_k(omega_phi) - L_k(omega_ref).
double l_functional_difference(const Model& model, const Potential& phi, int k);

struct GeodesicSpec {
  int k = 1;
  std::vector<double> lambda_hat;  // traceless
  std::vector<double> s_grid;
  GramMatrix base;
  /// Rows: a base-orthonormal frame {tau_alpha}. Empty: inverse Cholesky frame of base.
  ComplexMatrix frame;
  double fd_step = 1e-2;

  /// Subtracts the mean of lambda; default s grid is 21 points on [-1, 1].
  static GeodesicSpec make(const GramMatrix& base, std::vector<double> lambda, ComplexMatrix frame = {},
                           std::vector<double> s_grid = {});
};

/// Orientation of the one-parameter subgroup on Gram matrices:
/// G(s) = T^{-1} exp(sigma s Lambda) T^{-dagger} in the tau frame T.
inline constexpr double kGeodesicSigma = -1.0;

struct GeodesicResult {
  std::vector<double> s;
  std::vector<double> f;            // V k^n P~_k(FS(G(s)), G(s))
  double fprime_integral = 0.0;     // int (sum lh |tau|^2 / sum |tau|^2) c1(L^k, FS(G*))^n
  double fprime_surrogate = 0.0;    // five-point stencil on f at s = 0
  double min_second_difference = 0.0;
};

/// Gram matrix on the geodesic at parameter s.
GramMatrix geodesic_gram(const GeodesicSpec& spec, double s);
double f_value(const Model& model, const GeodesicSpec& spec, double s);
GeodesicResult f_geodesic(const Model& model, const GeodesicSpec& spec);

struct Conv1Slack {
  double lower = 0.0;
  double upper = 0.0;
};

/// Slacks of -int phi c1(h)^n <= I(h') - I(h) <= -int phi c1(h')^n, h' = h e^{-phi}.
Conv1Slack lemma_conv1_check(const Model& model, const MetricLevelK& m, const MetricLevelK& m2);

/// P~(h_k, Hilb h_k) - P~(FS Hilb h_k, Hilb h_k) for the Bergman metric h_k of h_ref e^{-phi}.
double lemma_step1_gap(const Model& model, const Potential& phi, int k);

struct Step2Report {
  int k = 0;
  std::vector<double> lambda;  // -1/2 log of the eigenvalues of Hilb(h_k) in the tau frame
  double lambda_hat_max = 0.0;
  double f0 = 0.0;
  double f1 = 0.0;
  double fprime_integral = 0.0;
  /// P~(FS(H_k), H_k) - P~(FS(H*), H*)
  double gap = 0.0;
  /// (f(1) - f(0) - f'(0)) / (V k^n), nonnegative by convexity.
  double convexity_slack = 0.0;
};

/// Lemma step2 data: h_k is the Bergman metric of h_ref e^{-phi}, H* = Hilb of that of phi_inf.
Step2Report lemma_step2_check(const Model& model, const Potential& phi, const Potential& phi_inf, int k);

/// |I_k(h*) - I_k(h**)| / (V k^n).
double lemma_step3_gap(const Model& model, const Potential& phi_inf, int k);

struct FunctionalReport {
  struct Row {
    std::string potential;
    int k = 0;
    double l_diff = 0.0;       // L_k(omega_phi) - L_k(omega)
    double step1_gap = 0.0;
    double step2_gap = 0.0;
    double step2_convexity = 0.0;
    double step3_gap = 0.0;
    double chain = 0.0;        // P~(h_k, Hilb h_k) - P~(h*_k, Hilb h*_k)
  };
  struct Entry {
    std::string potential;
    double nu = 0.0;
    double chain_c = 0.0;      // smallest c with chain >= -c/k over the k list
    std::vector<Row> rows;
  };
  std::vector<Entry> entries;
  std::vector<std::string> failures;
  int t_order = 16;
  std::size_t nodes = 0;
};

struct SuiteTolerances {
  double nu = 1e-6;
  double quadrature = 1e-8;
};

/// Theorem chain at phi_inf = 0 (omega_ref is cscK) for every suite potential and level.
FunctionalReport theorem1_suite(const Model& model, const std::vector<Potential>& suite, const std::vector<int>& ks,
                                const SuiteTolerances& tol = {});

}  // namespace kq
