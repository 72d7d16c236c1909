#include "kq/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kq/numerics.hpp"

namespace kq {

namespace {

struct PathPoint {
  PotentialField psi;
  std::vector<double> dpsi;
};

struct TNode {
  double t;
  double w;
};

std::vector<TNode> t_rule(const PathSpec& p) {
  if (p.t_order < 1 || p.panels < 1) throw ArgumentError("path quadrature needs t_order >= 1 and panels >= 1");
  const auto gl = gauss_legendre(p.t_order);
  const int legs = p.kind == PathKind::TwoLeg ? 2 : 1;
  const int m = legs * p.panels;
  std::vector<TNode> out;
  for (int j = 0; j < m; ++j) {
    const double a = static_cast<double>(j) / m, h = 1.0 / m;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i)
      out.push_back({a + 0.5 * h * (gl.nodes[i] + 1.0), 0.5 * h * gl.weights[i]});
  }
  return out;
}

PotentialField via_or_default(const Model& model, const PotentialField& end, const PathSpec& p) {
  if (p.via) {
    model.check_field(*p.via);
    return *p.via;
  }
  PotentialField v = 0.25 * end;
  for (double& x : v.value) x += 0.3;
  return v;
}

// scale: 1 for potentials on L, k for level-k potentials (family paths only).
PathPoint path_point(const Model& model, const PotentialField& end, const PotentialField& via, const PathSpec& p,
                     double scale, double t) {
  PathPoint out;
  switch (p.kind) {
    case PathKind::Linear:
      out.psi = t * end;
      out.dpsi = end.value;
      break;
    case PathKind::TwoLeg:
      if (t <= 0.5) {
        out.psi = (2.0 * t) * via;
        out.dpsi = via.value;
        for (double& x : out.dpsi) x *= 2.0;
      } else {
        const double s = 2.0 * t - 1.0;
        out.psi = (1.0 - s) * via + s * end;
        out.dpsi.resize(end.size());
        for (std::size_t i = 0; i < end.size(); ++i) out.dpsi[i] = 2.0 * (end.value[i] - via.value[i]);
      }
      break;
    case PathKind::Family: {
      const double lam = std::pow(p.family_lambda, t);
      out.psi = scale * Potential::mobius(lam).evaluate(model);
      out.dpsi = mobius_log_derivative(model, lam).value;
      const double c = scale * std::log(p.family_lambda);
      for (double& x : out.dpsi) x *= c;
      break;
    }
  }
  return out;
}

void check_family_endpoint(const Model& model, const PotentialField& end, const PathSpec& p, double scale) {
  if (p.kind != PathKind::Family) return;
  if (model.kind() != ModelKind::CP1) throw UnsupportedError("family paths are only defined on CP1");
  if (!(p.family_lambda > 0.0)) throw ArgumentError("family path needs lambda > 0");
  const PotentialField ref = scale * Potential::mobius(p.family_lambda).evaluate(model);
  double err = 0.0;
  for (std::size_t i = 0; i < end.size(); ++i) err = std::max(err, std::abs(ref.value[i] - end.value[i]));
  if (err > 1e-10 * std::max(1.0, scale))
    throw ArgumentError("family path endpoint is not the Mobius potential with the given lambda");
}

void require_positive(const PotentialField& f, double level, double t) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f.positive(i, level)) {
      std::ostringstream os;
      os << "path leaves the Kahler cone at t = " << t << ", node " << i << ": ratio " << f.volume_ratio(i, level);
      throw PositivityError(os.str());
    }
  }
}

double kn(const Model& model, int k) { return std::pow(static_cast<double>(k), model.dim()); }

}  // namespace

PathSpec PathSpec::linear(int t_order, int panels) { return PathSpec{PathKind::Linear, std::nullopt, 1.0, t_order, panels}; }

PathSpec PathSpec::two_leg(std::optional<PotentialField> via, int t_order, int panels) {
  return PathSpec{PathKind::TwoLeg, std::move(via), 1.0, t_order, panels};
}

PathSpec PathSpec::family(double lambda, int t_order, int panels) {
  return PathSpec{PathKind::Family, std::nullopt, lambda, t_order, panels};
}

const char* to_string(PathKind k) {
  switch (k) {
    case PathKind::Linear: return "linear";
    case PathKind::TwoLeg: return "two-leg";
    case PathKind::Family: return "family";
  }
  return "?";
}

// ---------------------------------------------------------------- I_k

double aubin_yau(const Model& model, const MetricLevelK& m, const PathSpec& path) {
  check_metric(model, m);
  check_family_endpoint(model, m.psi, path, m.k);
  const PotentialField via = via_or_default(model, m.psi, path);
  std::vector<double> buf(model.size());
  double total = 0.0;
  for (const TNode& tn : t_rule(path)) {
    const PathPoint pp = path_point(model, m.psi, via, path, m.k, tn.t);
    require_positive(pp.psi, m.k, tn.t);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = pp.dpsi[i] * pp.psi.volume_ratio(i, m.k);
    total += tn.w * model.integrate(buf);
  }
  return -total;
}

double aubin_yau_difference(const Model& model, const MetricLevelK& m0, const MetricLevelK& m1, int t_order) {
  if (m0.k != m1.k) throw ArgumentError("aubin_yau_difference: levels differ");
  check_metric(model, m0);
  check_metric(model, m1);
  const PotentialField d = m1.psi + (-1.0) * m0.psi;
  const auto gl = gauss_legendre(t_order);
  std::vector<double> buf(model.size());
  double total = 0.0;
  for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
    const double t = 0.5 * (gl.nodes[j] + 1.0);
    const PotentialField p = m0.psi + t * d;
    require_positive(p, m0.k, t);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = d.value[i] * p.volume_ratio(i, m0.k);
    total += 0.5 * gl.weights[j] * model.integrate(buf);
  }
  return -total;
}

double p_tilde(const Model& model, const MetricLevelK& m, const GramMatrix& g) {
  if (g.level() != m.k) throw ArgumentError("p_tilde: Gram level does not match metric level");
  return g.log_det() / g.size() - aubin_yau(model, m) / (model.volume() * kn(model, m.k));
}

// ---------------------------------------------------------------- K-energy

double k_energy(const Model& model, const PotentialField& phi, const PathSpec& path) {
  if (model.kind() != ModelKind::CP1) throw UnsupportedError("k_energy requires scalar curvature, available on CP1 only");
  model.check_field(phi);
  check_family_endpoint(model, phi, path, 1.0);
  const PotentialField via = via_or_default(model, phi, path);
  std::vector<double> buf(model.size());
  double total = 0.0;
  for (const TNode& tn : t_rule(path)) {
    const PathPoint pp = path_point(model, phi, via, path, 1.0, tn.t);
    require_positive(pp.psi, 1.0, tn.t);
    const ScalarField s = scalar_curvature(model, pp.psi);
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = (s.values[i] - model.sbar()) * pp.dpsi[i] * pp.psi.volume_ratio(i, 1.0);
    total += tn.w * model.integrate(buf);
  }
  return -total / model.volume();
}

double k_energy(const Model& model, const Potential& phi, const PathSpec& path) {
  return k_energy(model, phi.evaluate(model), path);
}

// ---------------------------------------------------------------- L_k

double l_functional(const Model& model, const Potential& phi, int k) {
  const MetricLevelK m = power_metric(model, phi, k);
  return p_tilde(model, m, hilb(model, m));
}

double l_functional_difference(const Model& model, const Potential& phi, int k) {
  return l_functional(model, phi, k) - l_functional(model, Potential::zero(), k);
}

// ---------------------------------------------------------------- geodesic

GeodesicSpec GeodesicSpec::make(const GramMatrix& base, std::vector<double> lambda, ComplexMatrix frame,
                                 std::vector<double> s_grid) {
  if (static_cast<int>(lambda.size()) != base.size()) throw ArgumentError("lambda length must equal N_k");
  double mean = 0.0;
  for (double l : lambda) mean += l;
  mean /= lambda.size();
  for (double& l : lambda) l -= mean;
  if (s_grid.empty())
    for (int i = 0; i <= 20; ++i) s_grid.push_back(-1.0 + 0.1 * i);
  if (frame.size() == 0) frame = base.orthonormal_frame();
  if (frame.rows() != base.size() || frame.cols() != base.size()) throw ArgumentError("frame size must be N_k x N_k");
  return GeodesicSpec{base.level(), std::move(lambda), std::move(s_grid), base, std::move(frame)};
}

GramMatrix geodesic_gram(const GeodesicSpec& spec, double s) {
  const int n = spec.base.size();
  double sum = 0.0, scale = 0.0;
  for (double l : spec.lambda_hat) {
    sum += l;
    scale = std::max(scale, std::abs(l));
  }
  if (static_cast<int>(spec.lambda_hat.size()) != n) throw ArgumentError("lambda length must equal N_k");
  if (std::abs(sum) > 1e-12 * n * std::max(1.0, scale)) throw ArgumentError("geodesic direction must be traceless");
  bool diag = true;
  for (int r = 0; r < n && diag; ++r)
    for (int c = 0; c < n; ++c)
      if (r != c && spec.frame(r, c) != std::complex<double>(0.0)) {
        diag = false;
        break;
      }
  ComplexMatrix tinv;
  if (diag) {
    tinv = ComplexMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i) tinv(i, i) = 1.0 / spec.frame(i, i);
  } else {
    tinv = spec.frame.partialPivLu().inverse();
  }
  Eigen::VectorXd e(n);
  for (int i = 0; i < n; ++i) e(i) = std::exp(kGeodesicSigma * s * spec.lambda_hat[i]);
  return GramMatrix::make(spec.k, tinv * e.asDiagonal() * tinv.adjoint());
}

double f_value(const Model& model, const GeodesicSpec& spec, double s) {
  const GramMatrix g = geodesic_gram(spec, s);
  return model.volume() * kn(model, spec.k) * p_tilde(model, fs(model, g), g);
}

GeodesicResult f_geodesic(const Model& model, const GeodesicSpec& spec) {
  GeodesicResult r;
  r.s = spec.s_grid;
  for (double s : r.s) r.f.push_back(f_value(model, spec, s));
  r.min_second_difference = 0.0;
  if (r.f.size() >= 3) {
    r.min_second_difference = INFINITY;
    for (std::size_t i = 1; i + 1 < r.f.size(); ++i)
      r.min_second_difference = std::min(r.min_second_difference, r.f[i + 1] - 2.0 * r.f[i] + r.f[i - 1]);
  }
  const double h = spec.fd_step;
  r.fprime_surrogate = (f_value(model, spec, -2 * h) - 8 * f_value(model, spec, -h) + 8 * f_value(model, spec, h) -
                        f_value(model, spec, 2 * h)) /
                       (12 * h);

  // d/ds psi(s) at 0 is -sigma sum lh |tau|^2 / sum |tau|^2.
  const MetricLevelK base = fs(model, spec.base);
  const SectionBasis basis(model, spec.k);
  const int n = basis.size();
  std::vector<double> buf(model.size());
  ComplexVector w(n);
  const bool cp1 = model.kind() == ModelKind::CP1;
  if (!cp1) {
    for (int r0 = 0; r0 < n; ++r0)
      for (int c = 0; c < n; ++c)
        if (r0 != c && spec.frame(r0, c) != std::complex<double>(0.0))
          throw UnsupportedError("non-diagonal frames are only supported on CP1");
  }
  for (std::size_t i = 0; i < model.size(); ++i) {
    double num = 0.0, den = 0.0;
    if (cp1) {
      for (int a = 0; a < n; ++a) w(a) = basis.value(i, a);
      const ComplexVector v = spec.frame * w;
      for (int a = 0; a < n; ++a) {
        num += spec.lambda_hat[a] * std::norm(v(a));
        den += std::norm(v(a));
      }
    } else {
      for (int a = 0; a < n; ++a) {
        const double q = std::norm(spec.frame(a, a)) * basis.norm2(i, a);
        num += spec.lambda_hat[a] * q;
        den += q;
      }
    }
    buf[i] = num / den * base.psi.volume_ratio(i, spec.k);
  }
  r.fprime_integral = -kGeodesicSigma * model.integrate(buf);
  return r;
}

// ---------------------------------------------------------------- lemmas

Conv1Slack lemma_conv1_check(const Model& model, const MetricLevelK& m, const MetricLevelK& m2) {
  const double di = aubin_yau_difference(model, m, m2);
  std::vector<double> lo(model.size()), hi(model.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    const double phi = m2.psi.value[i] - m.psi.value[i];
    lo[i] = phi * m.psi.volume_ratio(i, m.k);
    hi[i] = phi * m2.psi.volume_ratio(i, m.k);
  }
  return {di + model.integrate(lo), -model.integrate(hi) - di};
}

double lemma_step1_gap(const Model& model, const Potential& phi, int k) {
  const BergmanSequence seq = bergman_sequence(model, phi, k);
  return aubin_yau_difference(model, seq.h_star, seq.h_star2) / (model.volume() * kn(model, k));
}

double lemma_step3_gap(const Model& model, const Potential& phi_inf, int k) {
  return std::abs(lemma_step1_gap(model, phi_inf, k));
}

Step2Report lemma_step2_check(const Model& model, const Potential& phi, const Potential& phi_inf, int k) {
  const BergmanSequence seq = bergman_sequence(model, phi, k);
  const BergmanSequence star = bergman_sequence(model, phi_inf, k);
  const GramMatrix& hk = seq.H_star;     // Hilb(h_k)
  const GramMatrix& hs = star.H_star;    // H_k*
  const int n = hs.size();
  const ComplexMatrix t = hs.orthonormal_frame();
  const ComplexMatrix c = t * hk.matrix() * t.adjoint();

  Step2Report r;
  r.k = k;
  r.lambda.resize(n);
  ComplexMatrix frame;
  bool diag = true;
  for (int i = 0; i < n && diag; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && c(i, j) != std::complex<double>(0.0)) {
        diag = false;
        break;
      }
  if (diag) {
    for (int a = 0; a < n; ++a) r.lambda[a] = -0.5 * std::log(c(a, a).real());
    frame = t;
  } else {
    const Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (c + c.adjoint()));
    for (int a = 0; a < n; ++a) r.lambda[a] = -0.5 * std::log(es.eigenvalues()(a));
    frame = es.eigenvectors().adjoint() * t;
  }
  double mean = 0.0;
  for (double l : r.lambda) mean += l / n;
  std::vector<double> dir(n);
  for (int a = 0; a < n; ++a) {
    r.lambda_hat_max = std::max(r.lambda_hat_max, std::abs(r.lambda[a] - mean));
    dir[a] = 2.0 * r.lambda[a];  // Gram matrices transform quadratically in the section scaling
  }
  GeodesicSpec spec = GeodesicSpec::make(hs, dir, frame, {0.0, 1.0});
  const GeodesicResult g = f_geodesic(model, spec);
  r.f0 = g.f[0];
  r.f1 = g.f[1];
  r.fprime_integral = g.fprime_integral;
  const double vk = model.volume() * kn(model, k);
  r.gap = (r.f1 - r.f0) / vk;
  r.convexity_slack = (r.f1 - r.f0 - r.fprime_integral) / vk;
  return r;
}

// ---------------------------------------------------------------- theorem chain

FunctionalReport theorem1_suite(const Model& model, const std::vector<Potential>& suite, const std::vector<int>& ks,
                                const SuiteTolerances& tol) {
  if (model.kind() != ModelKind::CP1) throw UnsupportedError("theorem1_suite needs the K-energy, available on CP1 only");
  for (int k : ks) model.check_level(k);
  FunctionalReport rep;
  rep.nodes = model.size();
  const Potential zero = Potential::zero();
  for (const Potential& phi : suite) {
    FunctionalReport::Entry e;
    e.potential = phi.label();
    e.nu = k_energy(model, phi);
    if (e.nu < -tol.nu) rep.failures.push_back(e.potential + ": K-energy " + std::to_string(e.nu) + " < 0");
    for (int k : ks) {
      FunctionalReport::Row row;
      row.potential = e.potential;
      row.k = k;
      row.l_diff = l_functional_difference(model, phi, k);
      row.step1_gap = lemma_step1_gap(model, phi, k);
      const Step2Report s2 = lemma_step2_check(model, phi, zero, k);
      row.step2_gap = s2.gap;
      row.step2_convexity = s2.convexity_slack;
      row.step3_gap = lemma_step3_gap(model, zero, k);
      const BergmanSequence b = bergman_sequence(model, phi, k);
      const BergmanSequence b0 = bergman_sequence(model, zero, k);
      row.chain = p_tilde(model, b.h_star, b.H_star) - p_tilde(model, b0.h_star, b0.H_star);
      e.chain_c = std::max(e.chain_c, -k * row.chain);
      const std::string where = e.potential + ", k=" + std::to_string(k);
      if (row.step1_gap < -tol.quadrature) rep.failures.push_back(where + ": step1 gap " + std::to_string(row.step1_gap));
      if (row.step2_convexity < -tol.quadrature * (1.0 + std::abs(s2.f1 - s2.f0) / (model.volume() * kn(model, k))))
        rep.failures.push_back(where + ": step2 convexity slack " + std::to_string(row.step2_convexity));
      e.rows.push_back(row);
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace kq
