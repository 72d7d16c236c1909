#include "kq/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "kq/numerics.hpp"

namespace kq {

std::string to_string(ModelKind kind) { return kind == ModelKind::CP1 ? "CP1" : "CP2_toric"; }

// ---------------------------------------------------------------- fields

double ScalarField::sup_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }
double ScalarField::max() const { return *std::max_element(values.begin(), values.end()); }

double PotentialField::volume_ratio(std::size_t i, double level) const {
  const double* k = hess.data() + i * dim * dim;
  if (dim == 1) return level + k[0];
  return (level + k[0]) * (level + k[3]) - k[1] * k[2];
}

bool PotentialField::positive(std::size_t i, double level) const {
  const double* k = hess.data() + i * dim * dim;
  if (dim == 1) return level + k[0] > 0.0;
  // level I + K is similar to a symmetric matrix, so det > 0 and trace > 0 suffice.
  return volume_ratio(i, level) > 0.0 && 2.0 * level + k[0] + k[3] > 0.0;
}

PotentialField& PotentialField::operator+=(const PotentialField& other) {
  if (other.grid_id != grid_id || other.dim != dim || other.value.size() != value.size())
    throw ArgumentError("PotentialField: grid mismatch");
  for (std::size_t i = 0; i < value.size(); ++i) value[i] += other.value[i];
  for (std::size_t i = 0; i < hess.size(); ++i) hess[i] += other.hess[i];
  axisymmetric = axisymmetric && other.axisymmetric;
  return *this;
}

PotentialField& PotentialField::operator*=(double s) {
  for (double& v : value) v *= s;
  for (double& v : hess) v *= s;
  return *this;
}

// ---------------------------------------------------------------- model

namespace {

std::uint64_t hash_grid(const QuadratureRule& q, ModelKind kind) {
  std::uint64_t h = fnv1a(to_string(kind));
  auto mix = [&h](const std::vector<double>& v) {
    h = fnv1a(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(double)), h);
  };
  mix(q.coord0);
  mix(q.coord1);
  mix(q.weights);
  return h;
}

}  // namespace

Model Model::build(std::string_view name, int resolution_k, const ModelLimits& limits) {
  Model m;
  if (name == "CP1") {
    m.kind_ = ModelKind::CP1;
    m.dim_ = 1;
  } else if (name == "CP2_toric") {
    m.kind_ = ModelKind::CP2Toric;
    m.dim_ = 2;
  } else {
    throw ArgumentError("unknown model '" + std::string(name) + "' (expected CP1 or CP2_toric)");
  }
  if (resolution_k < 1) throw ArgumentError("resolution_k must be >= 1");
  if (resolution_k > limits.max_resolution)
    throw CapabilityError("resolution " + std::to_string(resolution_k) + " exceeds configured limit " +
                          std::to_string(limits.max_resolution));
  m.resolution_ = resolution_k;

  auto q = std::make_shared<QuadratureRule>();
  q->capability_k = resolution_k;
  if (m.kind_ == ModelKind::CP1) {
    const int ntheta = 2 * resolution_k + 24;
    const int nphi = 2 * ntheta;
    const std::size_t count = static_cast<std::size_t>(ntheta) * nphi;
    if (count > limits.max_nodes)
      throw CapabilityError("grid of " + std::to_string(count) + " nodes exceeds memory budget of " +
                            std::to_string(limits.max_nodes));
    const GaussLegendre gl = gauss_legendre(ntheta);
    q->n_outer = ntheta;
    q->n_inner = nphi;
    q->coord0.reserve(count);
    q->coord1.reserve(count);
    q->weights.reserve(count);
    for (int i = 0; i < ntheta; ++i) {
      for (int j = 0; j < nphi; ++j) {
        q->coord0.push_back(gl.nodes[i]);
        q->coord1.push_back(2.0 * std::numbers::pi * j / nphi);
        // omega_ref = du daz / (4 pi); uniform azimuth weight 2 pi / nphi.
        q->weights.push_back(gl.weights[i] / (2.0 * nphi));
      }
    }
    m.moments_.assign(2, std::vector<double>(count));
    for (std::size_t n = 0; n < count; ++n) {
      m.moments_[0][n] = 0.5 * (1.0 + q->coord0[n]);
      m.moments_[1][n] = 0.5 * (1.0 - q->coord0[n]);
    }
    m.sht_ = std::make_shared<SphericalTransform>(gl.nodes, gl.weights, nphi);
  } else {
    const int nq = 2 * resolution_k + 24;
    const std::size_t count = static_cast<std::size_t>(nq) * nq;
    if (count > limits.max_nodes)
      throw CapabilityError("grid of " + std::to_string(count) + " nodes exceeds memory budget of " +
                            std::to_string(limits.max_nodes));
    const GaussLegendre gl = gauss_legendre(nq);
    q->n_outer = nq;
    q->n_inner = nq;
    m.moments_.assign(3, std::vector<double>());
    for (int i = 0; i < nq; ++i) {
      const double s = 0.5 * (1.0 + gl.nodes[i]);
      for (int j = 0; j < nq; ++j) {
        const double t = 0.5 * (1.0 + gl.nodes[j]);
        const double x1 = s;
        const double x2 = (1.0 - s) * t;
        const double x0 = (1.0 - s) * (1.0 - t);
        q->coord0.push_back(x1);
        q->coord1.push_back(x2);
        // omega_ref^2 pushes forward to 2 dx1 dx2 on the simplex; Jacobian (1 - s) / 4.
        q->weights.push_back(2.0 * 0.25 * gl.weights[i] * gl.weights[j] * (1.0 - s));
        m.moments_[0].push_back(x0);
        m.moments_[1].push_back(x1);
        m.moments_[2].push_back(x2);
      }
    }
  }
  m.grid_id_ = hash_grid(*q, m.kind_);
  m.grid_ = std::move(q);
  return m;
}

std::string Model::signature() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s/res%d/%dx%d/%016llx", name().c_str(), resolution_, grid_->n_outer,
                grid_->n_inner, static_cast<unsigned long long>(grid_id_));
  return buf;
}

double Model::integrate(std::span<const double> f) const {
  if (f.size() != size()) throw ArgumentError("integrate: field does not match grid");
  return weighted_sum(grid_->weights, f);
}

double Model::integrate(const ScalarField& f) const {
  check_field(f);
  return integrate(f.values);
}

void Model::check_level(int k) const {
  if (k < 1 || k > grid_->capability_k)
    throw CapabilityError("level k=" + std::to_string(k) + " outside quadrature capability [1, " +
                          std::to_string(grid_->capability_k) + "] of " + name());
}

std::complex<double> Model::z1(std::size_t node) const {
  return std::polar(std::sqrt(moments_[1][node]), grid_->coord1[node]);
}

const SphericalTransform& Model::sht() const {
  if (!sht_) throw UnsupportedError("spectral differentiation is only available on CP1");
  return *sht_;
}

ScalarField Model::make_field(std::vector<double> values) const {
  if (values.size() != size()) throw ArgumentError("field size does not match grid");
  return ScalarField{std::move(values), grid_id_};
}

void Model::check_field(const ScalarField& f) const {
  if (f.grid_id != grid_id_ || f.values.size() != size()) throw ArgumentError("scalar field lives on a different grid");
}

void Model::check_field(const PotentialField& f) const {
  if (f.grid_id != grid_id_ || f.value.size() != size() || f.dim != dim_)
    throw ArgumentError("potential field lives on a different grid");
}

// ---------------------------------------------------------------- potentials

Potential Potential::constant(double c) {
  Potential p;
  p.terms_.push_back({1.0, family::Constant{c}});
  return p;
}
Potential Potential::mobius(double lambda) {
  if (!(lambda > 0.0)) throw ArgumentError("Mobius parameter must be positive");
  Potential p;
  p.terms_.push_back({1.0, family::Mobius{lambda}});
  return p;
}
Potential Potential::legendre(int l, double eps) {
  if (l < 1 || l > 3) throw ArgumentError("Legendre bump degree must be 1, 2 or 3");
  Potential p;
  p.terms_.push_back({1.0, family::Legendre{l, eps}});
  return p;
}
Potential Potential::toric_mobius(double lambda1, double lambda2) {
  if (!(lambda1 > 0.0 && lambda2 > 0.0)) throw ArgumentError("toric Mobius parameters must be positive");
  Potential p;
  p.terms_.push_back({1.0, family::ToricMobius{lambda1, lambda2}});
  return p;
}
Potential Potential::toric_bump(double eps) {
  Potential p;
  p.terms_.push_back({1.0, family::ToricBump{eps}});
  return p;
}

Potential& Potential::operator+=(const Potential& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

Potential operator*(double s, Potential p) {
  for (auto& t : p.terms_) t.coef *= s;
  return p;
}

namespace {

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct AtomLabel {
  std::string operator()(const family::Constant& a) const { return "const(" + fmt_num(a.c) + ")"; }
  std::string operator()(const family::Mobius& a) const { return "mobius(" + fmt_num(a.lambda) + ")"; }
  std::string operator()(const family::Legendre& a) const {
    return "legendre(" + std::to_string(a.l) + "," + fmt_num(a.eps) + ")";
  }
  std::string operator()(const family::ToricMobius& a) const {
    return "toric_mobius(" + fmt_num(a.lambda1) + "," + fmt_num(a.lambda2) + ")";
  }
  std::string operator()(const family::ToricBump& a) const { return "toric_bump(" + fmt_num(a.eps) + ")"; }
};

// Adds coef * atom to the field.
struct AtomSampler {
  const Model& model;
  PotentialField& out;
  double coef;

  void operator()(const family::Constant& a) const {
    for (double& v : out.value) v += coef * a.c;
  }

  void require(ModelKind kind, const char* what) const {
    if (model.kind() != kind) throw UnsupportedError(std::string(what) + " is not defined on " + model.name());
  }

  void operator()(const family::Mobius& a) const {
    require(ModelKind::CP1, "mobius family");
    const double l2 = a.lambda * a.lambda;
    for (std::size_t i = 0; i < model.size(); ++i) {
      const double d = model.moment(i, 0) + l2 * model.moment(i, 1);
      out.value[i] += coef * std::log(d);
      out.hess[i] += coef * (l2 / (d * d) - 1.0);
    }
  }

  void operator()(const family::Legendre& a) const {
    require(ModelKind::CP1, "legendre family");
    const double amp = 0.25 * a.eps;
    const double ev = -static_cast<double>(a.l) * (a.l + 1);
    for (std::size_t i = 0; i < model.size(); ++i) {
      const double p = legendre(a.l, model.cos_theta(i));
      out.value[i] += coef * amp * p;
      out.hess[i] += coef * amp * ev * p;
    }
  }

  // Relative Hessian M^{-1} H for a symmetric rho-Hessian H at CP2 node i.
  void add_toric(std::size_t i, double h11, double h12, double h22, double val) const {
    const double x1 = model.moment(i, 1), x2 = model.moment(i, 2), x0 = model.moment(i, 0);
    const double det = x1 * x2 * x0;
    const double mi11 = (x2 - x2 * x2) / det, mi12 = x1 * x2 / det, mi22 = (x1 - x1 * x1) / det;
    double* k = out.hess.data() + 4 * i;
    k[0] += coef * (mi11 * h11 + mi12 * h12);
    k[1] += coef * (mi11 * h12 + mi12 * h22);
    k[2] += coef * (mi12 * h11 + mi22 * h12);
    k[3] += coef * (mi12 * h12 + mi22 * h22);
    out.value[i] += coef * val;
  }

  void operator()(const family::ToricMobius& a) const {
    require(ModelKind::CP2Toric, "toric_mobius family");
    const double a1 = a.lambda1 * a.lambda1, a2 = a.lambda2 * a.lambda2;
    for (std::size_t i = 0; i < model.size(); ++i) {
      const double x0 = model.moment(i, 0), x1 = model.moment(i, 1), x2 = model.moment(i, 2);
      const double d = x0 + a1 * x1 + a2 * x2;
      const double p1 = a1 * x1 / d, p2 = a2 * x2 / d;
      // Hess_rho log(1 + sum a_j e^{rho_j}) = diag(p) - p p^T; subtract the reference.
      const double h11 = (p1 - p1 * p1) - (x1 - x1 * x1);
      const double h12 = -p1 * p2 + x1 * x2;
      const double h22 = (p2 - p2 * p2) - (x2 - x2 * x2);
      add_toric(i, h11, h12, h22, std::log(d));
    }
  }

  void operator()(const family::ToricBump& a) const {
    require(ModelKind::CP2Toric, "toric_bump family");
    for (std::size_t i = 0; i < model.size(); ++i) {
      const double x0 = model.moment(i, 0), x1 = model.moment(i, 1), x2 = model.moment(i, 2);
      const double x[2] = {x1, x2};
      const double g = x0 * x1 * x2;
      const double grad[2] = {x2 * (x0 - x1), x1 * (x0 - x2)};
      const double hx[2][2] = {{-2.0 * x2, x0 - x1 - x2}, {x0 - x1 - x2, -2.0 * x1}};
      const double mm[2][2] = {{x1 - x1 * x1, -x1 * x2}, {-x1 * x2, x2 - x2 * x2}};
      // f(rho) = g(x(rho)), dx_i/drho_j = M_ij:
      // f_jl = sum g_im M_ij M_ml + sum_i g_i (M_il d_ij - M_il x_j - x_i M_jl).
      double h[2][2] = {};
      for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l) {
          double s = 0.0;
          for (int ii = 0; ii < 2; ++ii)
            for (int mq = 0; mq < 2; ++mq) s += hx[ii][mq] * mm[ii][j] * mm[mq][l];
          for (int ii = 0; ii < 2; ++ii)
            s += grad[ii] * (mm[ii][l] * (ii == j ? 1.0 : 0.0) - mm[ii][l] * x[j] - x[ii] * mm[j][l]);
          h[j][l] = s;
        }
      add_toric(i, a.eps * h[0][0], a.eps * 0.5 * (h[0][1] + h[1][0]), a.eps * h[1][1], a.eps * g);
    }
  }
};

}  // namespace

PotentialField Potential::evaluate_unchecked(const Model& model) const {
  PotentialField f;
  f.grid_id = model.grid_id();
  f.dim = model.dim();
  f.value.assign(model.size(), 0.0);
  f.hess.assign(model.size() * f.dim * f.dim, 0.0);
  f.axisymmetric = true;
  for (const Term& t : terms_) std::visit(AtomSampler{model, f, t.coef}, t.atom);
  return f;
}

PotentialField Potential::evaluate(const Model& model) const {
  PotentialField f = evaluate_unchecked(model);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f.positive(i, 1.0)) {
      std::ostringstream os;
      os << "potential " << label() << " is not admissible on " << model.name() << ": omega_phi^n/omega^n = "
         << f.volume_ratio(i, 1.0) << " at node " << i;
      throw PositivityError(os.str());
    }
  }
  return f;
}

std::string Potential::label() const {
  if (terms_.empty()) return "zero";
  std::string s;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i) s += "+";
    if (terms_[i].coef != 1.0) s += fmt_num(terms_[i].coef) + "*";
    s += std::visit(AtomLabel{}, terms_[i].atom);
  }
  return s;
}

// ---------------------------------------------------------------- operators

ScalarField ma_ratio(const Model& model, const PotentialField& phi) {
  model.check_field(phi);
  std::vector<double> f(phi.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!phi.positive(i, 1.0)) {
      std::ostringstream os;
      os << "Monge-Ampere ratio not positive at node " << i << ": F = " << phi.volume_ratio(i, 1.0);
      throw PositivityError(os.str());
    }
    f[i] = phi.volume_ratio(i, 1.0);
  }
  return model.make_field(std::move(f));
}

ScalarField ma_ratio(const Model& model, const Potential& phi) {
  return ma_ratio(model, phi.evaluate_unchecked(model));
}

ScalarField scalar_curvature(const Model& model, const PotentialField& phi) {
  if (model.dim() != 1) throw UnsupportedError("scalar curvature is only implemented on CP1");
  const ScalarField f = ma_ratio(model, phi);
  std::vector<double> logf(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) logf[i] = std::log(f[i]);
  const std::vector<double> lap = model.sht().laplacian(logf);
  std::vector<double> s(f.size());
  const double sref = model.sbar();  // omega_FS has constant curvature 2 on CP1
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (sref - lap[i]) / f[i];
  return model.make_field(std::move(s));
}

ScalarField scalar_curvature(const Model& model, const Potential& phi) {
  return scalar_curvature(model, phi.evaluate(model));
}

ScalarField laplacian(const Model& model, const PotentialField& metric, const ScalarField& f) {
  if (model.dim() != 1) throw UnsupportedError("laplacian is only implemented on CP1");
  model.check_field(f);
  const ScalarField ratio = ma_ratio(model, metric);
  std::vector<double> lap = model.sht().laplacian(f.values);
  for (std::size_t i = 0; i < lap.size(); ++i) lap[i] /= ratio[i];
  return model.make_field(std::move(lap));
}

ScalarField laplacian(const Model& model, const Potential& metric, const ScalarField& f) {
  return laplacian(model, metric.evaluate(model), f);
}

PotentialField mobius_log_derivative(const Model& model, double lambda) {
  if (model.kind() != ModelKind::CP1) throw UnsupportedError("mobius family is only defined on CP1");
  PotentialField f;
  f.grid_id = model.grid_id();
  f.dim = 1;
  f.value.resize(model.size());
  f.hess.resize(model.size());
  const double l2 = lambda * lambda;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double x0 = model.moment(i, 0), x1 = model.moment(i, 1);
    const double d = x0 + l2 * x1;
    f.value[i] = 2.0 * l2 * x1 / d;
    f.hess[i] = 2.0 * l2 * (x0 - l2 * x1) / (d * d * d);
  }
  return f;
}

}  // namespace kq
