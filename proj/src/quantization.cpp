#include "kq/quantization.hpp"

#include <cmath>
#include <sstream>

#include "kq/numerics.hpp"

namespace kq {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Rows: nodes; columns: basis index. |s_alpha|^2_{h_ref^k} at each node.
Eigen::MatrixXd norm2_table(const Model& model, const SectionBasis& basis) {
  const int k = basis.level();
  const int n = model.dim();
  Eigen::MatrixXd t(model.size(), basis.size());
  std::vector<std::vector<double>> pw(n + 1, std::vector<double>(k + 1));
  for (std::size_t i = 0; i < model.size(); ++i) {
    for (int j = 0; j <= n; ++j) {
      pw[j][0] = 1.0;
      for (int e = 1; e <= k; ++e) pw[j][e] = pw[j][e - 1] * model.moment(i, j);
    }
    for (int a = 0; a < basis.size(); ++a) {
      const auto& ex = basis.exponents()[a];
      t(i, a) = n == 1 ? pw[0][k - ex[0]] * pw[1][ex[0]] : pw[0][k - ex[0] - ex[1]] * pw[1][ex[0]] * pw[2][ex[1]];
    }
  }
  return t;
}

// Integration weights times the level-k volume form, with the Hilb normalization N_k / (V k^n).
std::vector<double> hilb_weights(const Model& model, const MetricLevelK& m, int nk) {
  const double scale = nk / (model.volume() * std::pow(m.k, model.dim()));
  std::vector<double> c(model.size());
  const auto& w = model.grid().weights;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = scale * w[i] * std::exp(-m.psi.value[i]) * m.psi.volume_ratio(i, m.k);
  return c;
}

// FS potential psi = log(w^dagger A w) and its relative Hessian, A = G^{-1}.
MetricLevelK fs_from_inverse(const Model& model, int k, const ComplexMatrix& a) {
  model.check_level(k);
  const SectionBasis basis(model, k);
  const int nk = basis.size();
  if (a.rows() != nk || a.cols() != nk) throw ArgumentError("FS: matrix size does not match N_k");
  bool diag = true;
  for (int r = 0; r < nk && diag; ++r)
    for (int c = 0; c < nk; ++c)
      if (r != c && a(r, c) != std::complex<double>(0.0)) {
        diag = false;
        break;
      }

  MetricLevelK out;
  out.k = k;
  out.psi.grid_id = model.grid_id();
  out.psi.dim = model.dim();
  out.psi.value.resize(model.size());
  out.psi.hess.assign(model.size() * model.dim() * model.dim(), 0.0);
  out.psi.axisymmetric = diag;

  if (diag) {
    const Eigen::MatrixXd t = norm2_table(model, basis);
    std::vector<double> p(nk);
    for (std::size_t i = 0; i < model.size(); ++i) {
      double d = 0.0;
      for (int al = 0; al < nk; ++al) {
        p[al] = t(i, al) * a(al, al).real();
        d += p[al];
      }
      out.psi.value[i] = std::log(d);
      // Hess_rho log sum c_alpha e^{<m_alpha, rho>} is the covariance of the exponents.
      double mean[2] = {0.0, 0.0};
      for (int al = 0; al < nk; ++al)
        for (int j = 0; j < model.dim(); ++j) mean[j] += p[al] / d * basis.exponents()[al][j];
      double cov[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
      for (int al = 0; al < nk; ++al) {
        const double q = p[al] / d;
        const double d0 = basis.exponents()[al][0] - mean[0];
        const double d1 = basis.exponents()[al][1] - mean[1];
        cov[0][0] += q * d0 * d0;
        cov[0][1] += q * d0 * d1;
        cov[1][1] += q * d1 * d1;
      }
      if (model.dim() == 1) {
        out.psi.hess[i] = cov[0][0] / (model.moment(i, 0) * model.moment(i, 1)) - k;
      } else {
        const double x0 = model.moment(i, 0), x1 = model.moment(i, 1), x2 = model.moment(i, 2);
        const double det = x1 * x2 * x0;
        const double mi11 = (x2 - x2 * x2) / det, mi12 = x1 * x2 / det, mi22 = (x1 - x1 * x1) / det;
        double* kk = out.psi.hess.data() + 4 * i;
        kk[0] = mi11 * cov[0][0] + mi12 * cov[0][1] - k;
        kk[1] = mi11 * cov[0][1] + mi12 * cov[1][1];
        kk[2] = mi12 * cov[0][0] + mi22 * cov[0][1];
        kk[3] = mi12 * cov[0][1] + mi22 * cov[1][1] - k;
      }
    }
    return out;
  }

  if (model.kind() != ModelKind::CP1)
    throw UnsupportedError("non-diagonal Gram matrices are only supported on CP1 (CP2_toric is torus-invariant)");

  // Chart-aware evaluation: in the northern hemisphere differentiate in
  // z = Z1 / Z0, in the southern one in 1 / z, so the chart factor c stays >= 1/sqrt(2).
  ComplexVector w(nk), e(nk);
  std::vector<std::complex<double>> p0(k + 1), p1(k + 1);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const std::complex<double> z0 = model.z0(i), z1 = model.z1(i);
    p0[0] = p1[0] = 1.0;
    for (int j = 1; j <= k; ++j) {
      p0[j] = p0[j - 1] * z0;
      p1[j] = p1[j - 1] * z1;
    }
    const bool north = model.cos_theta(i) >= 0.0;
    for (int al = 0; al < nk; ++al) {
      w(al) = p0[k - al] * p1[al];
      if (north)
        e(al) = al == 0 ? 0.0 : static_cast<double>(al) * p0[k - al] * p1[al - 1];
      else
        e(al) = al == k ? 0.0 : static_cast<double>(k - al) * p0[k - al - 1] * p1[al];
    }
    const double c2 = north ? model.moment(i, 0) : model.moment(i, 1);
    const ComplexVector aw = a * w;
    const ComplexVector ae = a * e;
    const double d = w.dot(aw).real();
    const double eae = e.dot(ae).real();
    const std::complex<double> wae = w.dot(ae);
    out.psi.value[i] = std::log(d);
    out.psi.hess[i] = (eae * d - std::norm(wae)) / (c2 * d * d) - k;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- basis

SectionBasis::SectionBasis(const Model& model, int k) : model_(&model), k_(k) {
  model.check_level(k);
  if (model.dim() == 1) {
    for (int a = 0; a <= k; ++a) exponents_.push_back({a, 0});
  } else {
    for (int a = 0; a <= k; ++a)
      for (int b = 0; a + b <= k; ++b) exponents_.push_back({a, b});
  }
}

double SectionBasis::degree() const { return model_->volume() * std::pow(k_, model_->dim()); }

double SectionBasis::norm2(std::size_t node, int alpha) const {
  const auto& ex = exponents_[alpha];
  if (model_->dim() == 1) return std::pow(model_->moment(node, 0), k_ - ex[0]) * std::pow(model_->moment(node, 1), ex[0]);
  return std::pow(model_->moment(node, 0), k_ - ex[0] - ex[1]) * std::pow(model_->moment(node, 1), ex[0]) *
         std::pow(model_->moment(node, 2), ex[1]);
}

std::complex<double> SectionBasis::value(std::size_t node, int alpha) const {
  if (model_->dim() != 1) throw UnsupportedError("complex section values are only available on CP1");
  const int a = exponents_[alpha][0];
  return std::pow(std::complex<double>(model_->z0(node)), k_ - a) * std::pow(model_->z1(node), a);
}

SectionBasis section_basis(const Model& model, int k) { return SectionBasis(model, k); }

int section_count(const Model& model, int k) {
  return model.dim() == 1 ? k + 1 : (k + 1) * (k + 2) / 2;
}

// ---------------------------------------------------------------- Gram

GramMatrix GramMatrix::make(int k, ComplexMatrix m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ArgumentError("Gram matrix must be square and non-empty");
  const ComplexMatrix herm = 0.5 * (m + m.adjoint());
  bool diag = true;
  for (int r = 0; r < herm.rows() && diag; ++r)
    for (int c = 0; c < herm.cols(); ++c)
      if (r != c && herm(r, c) != std::complex<double>(0.0)) {
        diag = false;
        break;
      }
  Eigen::VectorXd d(herm.rows());
  for (int r = 0; r < herm.rows(); ++r) {
    d(r) = herm(r, r).real();
    if (!(d(r) > 0.0) || !std::isfinite(d(r))) {
      std::ostringstream os;
      os << "Gram matrix is not positive definite: diagonal entry " << r << " = " << d(r);
      throw PositivityError(os.str());
    }
  }
  if (!diag) {
    const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
    const ComplexMatrix scaled = s.asDiagonal() * herm * s.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(scaled, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo >= kPositivityTolerance * hi)) {
      std::ostringstream os;
      os << "Gram matrix is not positive definite: scaled eigenvalue range [" << lo << ", " << hi << "]";
      throw PositivityError(os.str());
    }
  }
  return GramMatrix(k, herm, diag);
}

GramMatrix GramMatrix::diagonal(int k, const Eigen::VectorXd& d) {
  ComplexMatrix m = ComplexMatrix::Zero(d.size(), d.size());
  for (int i = 0; i < d.size(); ++i) m(i, i) = d(i);
  return make(k, std::move(m));
}

double GramMatrix::log_det() const {
  if (diagonal_) {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += std::log(m_(i, i).real());
    return s;
  }
  const Eigen::LLT<ComplexMatrix> llt(m_);
  if (llt.info() != Eigen::Success) throw PositivityError("Cholesky factorization failed");
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += 2.0 * std::log(llt.matrixLLT()(i, i).real());
  return s;
}

ComplexMatrix GramMatrix::orthonormal_frame() const {
  if (diagonal_) {
    ComplexMatrix t = ComplexMatrix::Zero(size(), size());
    for (int i = 0; i < size(); ++i) t(i, i) = 1.0 / std::sqrt(m_(i, i).real());
    return t;
  }
  const Eigen::LLT<ComplexMatrix> llt(m_);
  if (llt.info() != Eigen::Success) throw PositivityError("Cholesky factorization failed");
  ComplexMatrix t = ComplexMatrix::Identity(size(), size());
  llt.matrixL().solveInPlace(t);
  return t;
}

ComplexMatrix GramMatrix::inverse() const {
  if (diagonal_) {
    ComplexMatrix a = ComplexMatrix::Zero(size(), size());
    for (int i = 0; i < size(); ++i) a(i, i) = 1.0 / m_(i, i).real();
    return a;
  }
  const ComplexMatrix t = orthonormal_frame();
  return t.adjoint() * t;
}

GramMatrix GramMatrix::scaled(double s) const { return GramMatrix(k_, s * m_, diagonal_); }

GramMatrix reference_gram(const Model& model, int k) {
  const SectionBasis basis(model, k);
  Eigen::VectorXd d(basis.size());
  for (int a = 0; a < basis.size(); ++a) {
    const auto& ex = basis.exponents()[a];
    d(a) = 1.0 / (model.dim() == 1 ? binomial(k, ex[0]) : multinomial(k, ex[0], ex[1]));
  }
  return GramMatrix::diagonal(k, d);
}

// ---------------------------------------------------------------- metrics

MetricLevelK power_metric(const Model& model, const PotentialField& phi, int k) {
  model.check_field(phi);
  MetricLevelK m;
  m.k = k;
  m.psi = static_cast<double>(k) * phi;
  return m;
}

MetricLevelK power_metric(const Model& model, const Potential& phi, int k) {
  return power_metric(model, phi.evaluate(model), k);
}

void check_metric(const Model& model, const MetricLevelK& m) {
  model.check_level(m.k);
  model.check_field(m.psi);
  for (std::size_t i = 0; i < m.psi.size(); ++i) {
    if (!m.psi.positive(i, m.k)) {
      std::ostringstream os;
      os << "curvature of level-" << m.k << " metric is not positive at node " << i
         << ": c1^n/omega^n = " << m.psi.volume_ratio(i, m.k);
      throw PositivityError(os.str());
    }
  }
}

MetricLevelK scale_metric(MetricLevelK m, double c) {
  for (double& v : m.psi.value) v -= c;
  return m;
}

// ---------------------------------------------------------------- Hilb / FS

GramMatrix hilb(const Model& model, const MetricLevelK& m) {
  check_metric(model, m);
  const SectionBasis basis(model, m.k);
  const int nk = basis.size();
  const std::vector<double> c = hilb_weights(model, m, nk);
  std::vector<double> buf(model.size());

  if (m.psi.axisymmetric || model.kind() == ModelKind::CP2Toric) {
    // Torus-invariant metric: distinct monomial weights are orthogonal.
    const Eigen::MatrixXd t = norm2_table(model, basis);
    Eigen::VectorXd d(nk);
    for (int a = 0; a < nk; ++a) {
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = c[i] * t(i, a);
      d(a) = pairwise_sum(buf);
    }
    return GramMatrix::diagonal(m.k, d);
  }

  ComplexMatrix w(model.size(), nk);
  for (std::size_t i = 0; i < model.size(); ++i)
    for (int a = 0; a < nk; ++a) w(i, a) = basis.value(i, a);
  ComplexMatrix g(nk, nk);
  std::vector<double> bim(model.size());
  for (int a = 0; a < nk; ++a) {
    for (int b = a; b < nk; ++b) {
      for (std::size_t i = 0; i < buf.size(); ++i) {
        const std::complex<double> v = c[i] * w(i, a) * std::conj(w(i, b));
        buf[i] = v.real();
        bim[i] = v.imag();
      }
      g(a, b) = {pairwise_sum(buf), pairwise_sum(bim)};
      g(b, a) = std::conj(g(a, b));
    }
  }
  return GramMatrix::make(m.k, std::move(g));
}

MetricLevelK fs(const Model& model, const GramMatrix& g) { return fs_from_inverse(model, g.level(), g.inverse()); }

MetricLevelK fs_from_frame(const Model& model, int k, const ComplexMatrix& frame) {
  return fs_from_inverse(model, k, frame.adjoint() * frame);
}

ScalarField orthonormal_density(const Model& model, const MetricLevelK& m, const GramMatrix& g) {
  if (g.level() != m.k) throw ArgumentError("Gram level does not match metric level");
  const MetricLevelK f = fs(model, g);
  std::vector<double> v(model.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(f.psi.value[i] - m.psi.value[i]);
  return model.make_field(std::move(v));
}

ScalarField bergman_kernel(const Model& model, const PotentialField& phi, int k) {
  const MetricLevelK m = power_metric(model, phi, k);
  const GramMatrix g = hilb(model, m);
  ScalarField rho = orthonormal_density(model, m, g);
  const double scale = g.size() * factorial(model.dim()) / (model.volume() * std::pow(k, model.dim()));
  for (double& v : rho.values) v *= scale;
  return rho;
}

ScalarField bergman_kernel(const Model& model, const Potential& phi, int k) {
  return bergman_kernel(model, phi.evaluate(model), k);
}

BergmanSequence bergman_sequence(const Model& model, const Potential& phi_inf, int k) {
  GramMatrix hp = hilb(model, power_metric(model, phi_inf, k));
  MetricLevelK hs = fs(model, hp);
  std::vector<double> vol(model.size());
  for (std::size_t i = 0; i < vol.size(); ++i) vol[i] = hs.psi.volume_ratio(i, k);
  GramMatrix H = hilb(model, hs);
  MetricLevelK hss = fs(model, H);
  return BergmanSequence{std::move(hs), model.make_field(std::move(vol)), std::move(H), std::move(hss), std::move(hp)};
}

double bergman_defect(const Model& model, const MetricLevelK& m) {
  const ScalarField d = orthonormal_density(model, m, hilb(model, m));
  double s = 0.0;
  for (double v : d.values) s = std::max(s, std::abs(v - 1.0));
  return s;
}

double almost_balanced_defect(const Model& model, const Potential& phi_inf, int k) {
  const BergmanSequence seq = bergman_sequence(model, phi_inf, k);
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i)
    s = std::max(s, std::abs(std::exp(seq.h_star2.psi.value[i] - seq.h_star.psi.value[i]) - 1.0));
  return s;
}

TIterationResult t_iterate(const Model& model, const GramMatrix& g0, int max_iter, double tol) {
  auto normalize = [](const GramMatrix& g) { return g.scaled(std::exp(-g.log_det() / g.size())); };
  GramMatrix g = normalize(g0);
  TIterationResult r{g, {}, {}, 0, false};
  for (int j = 0;; ++j) {
    MetricLevelK m;
    try {
      m = fs(model, g);
      const GramMatrix h = hilb(model, m);
      const ScalarField d = orthonormal_density(model, m, h);
      double defect = 0.0;
      for (double v : d.values) defect = std::max(defect, std::abs(v - 1.0));
      r.defect_history.push_back(defect);
      r.log_det_history.push_back(g.log_det());
      r.fixed = g;
      r.iterations = j;
      if (defect < tol) {
        r.converged = true;
        break;
      }
      if (j == max_iter) break;
      g = normalize(h);
    } catch (const PositivityError& e) {
      throw PositivityError("T-iteration lost positivity at iteration " + std::to_string(j) + ": " + e.what());
    }
  }
  return r;
}

}  // namespace kq
