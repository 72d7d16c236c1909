#include "kq/spherical.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kq/numerics.hpp"

namespace kq {

SphericalTransform::SphericalTransform(std::span<const double> u_nodes, std::span<const double> u_weights, int nphi)
    : ntheta_(static_cast<int>(u_nodes.size())),
      nphi_(nphi),
      lmax_(ntheta_ - 1),
      mmax_(std::min(ntheta_ - 1, (nphi - 1) / 2)),
      weights_(u_weights.begin(), u_weights.end()) {
  if (ntheta_ < 1 || nphi < 1 || u_weights.size() != u_nodes.size())
    throw std::invalid_argument("SphericalTransform: bad grid");

  plm_.assign(static_cast<std::size_t>(ntheta_) * (mmax_ + 1) * (lmax_ + 1), 0.0);
  for (int i = 0; i < ntheta_; ++i) {
    const double u = u_nodes[i];
    const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
    double pmm = std::sqrt(0.5);
    for (int m = 0; m <= mmax_; ++m) {
      if (m > 0) pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
      auto at = [&](int l) -> double& {
        return plm_[(static_cast<std::size_t>(i) * (mmax_ + 1) + m) * (lmax_ + 1) + l];
      };
      at(m) = pmm;
      if (m + 1 <= lmax_) at(m + 1) = std::sqrt(2.0 * m + 3.0) * u * pmm;
      for (int l = m + 2; l <= lmax_; ++l) {
        const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
        const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(m) * m) /
                                   (4.0 * (l - 1) * (l - 1) - 1.0));
        at(l) = a * (u * at(l - 1) - b * at(l - 2));
      }
    }
  }

  cos_.resize(static_cast<std::size_t>(mmax_ + 1) * nphi_);
  sin_.resize(cos_.size());
  for (int m = 0; m <= mmax_; ++m) {
    for (int j = 0; j < nphi_; ++j) {
      // Reduce the angle index first so the table is exact at symmetric points.
      const long long idx = (static_cast<long long>(m) * j) % nphi_;
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(idx) / nphi_;
      cos_[static_cast<std::size_t>(m) * nphi_ + j] = std::cos(ang);
      sin_[static_cast<std::size_t>(m) * nphi_ + j] = std::sin(ang);
    }
  }
}

SphericalTransform::Coefficients SphericalTransform::zero_coefficients() const {
  Coefficients c;
  c.lmax = lmax_;
  c.mmax = mmax_;
  c.a.assign(static_cast<std::size_t>(mmax_ + 1) * (lmax_ + 1), 0.0);
  c.b.assign(c.a.size(), 0.0);
  return c;
}

SphericalTransform::Coefficients SphericalTransform::analyze(std::span<const double> values) const {
  if (values.size() != static_cast<std::size_t>(ntheta_) * nphi_)
    throw std::invalid_argument("SphericalTransform::analyze: grid mismatch");
  Coefficients c = zero_coefficients();
  std::vector<double> ring_c(mmax_ + 1), ring_s(mmax_ + 1), buf(nphi_);
  for (int i = 0; i < ntheta_; ++i) {
    const double* row = values.data() + static_cast<std::size_t>(i) * nphi_;
    for (int m = 0; m <= mmax_; ++m) {
      const double norm = (m == 0 ? 1.0 : 2.0) / nphi_;
      for (int j = 0; j < nphi_; ++j) buf[j] = row[j] * cos_[static_cast<std::size_t>(m) * nphi_ + j];
      ring_c[m] = norm * pairwise_sum(buf);
      for (int j = 0; j < nphi_; ++j) buf[j] = row[j] * sin_[static_cast<std::size_t>(m) * nphi_ + j];
      ring_s[m] = norm * pairwise_sum(buf);
    }
    for (int m = 0; m <= mmax_; ++m) {
      for (int l = m; l <= lmax_; ++l) {
        const double p = weights_[i] * plm(i, l, m);
        c.a[c.index(l, m)] += p * ring_c[m];
        c.b[c.index(l, m)] += p * ring_s[m];
      }
    }
  }
  return c;
}

std::vector<double> SphericalTransform::synthesize(const Coefficients& c) const {
  if (c.lmax != lmax_ || c.mmax != mmax_) throw std::invalid_argument("SphericalTransform::synthesize: band mismatch");
  std::vector<double> out(static_cast<std::size_t>(ntheta_) * nphi_, 0.0);
  std::vector<double> ring_c(mmax_ + 1), ring_s(mmax_ + 1);
  for (int i = 0; i < ntheta_; ++i) {
    for (int m = 0; m <= mmax_; ++m) {
      double sc = 0.0, ss = 0.0;
      for (int l = m; l <= lmax_; ++l) {
        sc += c.a[c.index(l, m)] * plm(i, l, m);
        ss += c.b[c.index(l, m)] * plm(i, l, m);
      }
      ring_c[m] = sc;
      ring_s[m] = ss;
    }
    double* row = out.data() + static_cast<std::size_t>(i) * nphi_;
    for (int j = 0; j < nphi_; ++j) {
      double v = 0.0;
      for (int m = 0; m <= mmax_; ++m)
        v += ring_c[m] * cos_[static_cast<std::size_t>(m) * nphi_ + j] +
             ring_s[m] * sin_[static_cast<std::size_t>(m) * nphi_ + j];
      row[j] = v;
    }
  }
  return out;
}

std::vector<double> SphericalTransform::laplacian(std::span<const double> values) const {
  Coefficients c = analyze(values);
  for (int m = 0; m <= mmax_; ++m) {
    for (int l = m; l <= lmax_; ++l) {
      const double ev = -static_cast<double>(l) * (l + 1);
      c.a[c.index(l, m)] *= ev;
      c.b[c.index(l, m)] *= ev;
    }
  }
  return synthesize(c);
}

}  // namespace kq
