#pragma once

#include <span>
#include <vector>

namespace kq {

/// Real spherical-harmonic transform on a Gauss-Legendre (in cos theta) x
/// uniform (in azimuth) product grid. Node (i, j) lives at index i * nphi + j.
///
/// Coefficients use orthonormal associated Legendre functions on [-1, 1]:
///   f(u, az) = sum_{l, m} Pbar_l^m(u) (a_lm cos(m az) + b_lm sin(m az)).
/// Band limit: l <= lmax = ntheta - 1, m <= mmax = min(lmax, (nphi - 1) / 2).
class SphericalTransform {
 public:
  SphericalTransform(std::span<const double> u_nodes, std::span<const double> u_weights, int nphi);

  struct Coefficients {
    int lmax = 0;
    int mmax = 0;
    std::vector<double> a;  // index(l, m)
    std::vector<double> b;
    std::size_t index(int l, int m) const { return static_cast<std::size_t>(m) * (lmax + 1) + l; }
  };

  int ntheta() const { return ntheta_; }
  int nphi() const { return nphi_; }
  int lmax() const { return lmax_; }
  int mmax() const { return mmax_; }

  Coefficients analyze(std::span<const double> values) const;
  std::vector<double> synthesize(const Coefficients& c) const;
  Coefficients zero_coefficients() const;

  /// Unit-sphere Laplacian (eigenvalue -l(l+1) on degree-l harmonics).
  std::vector<double> laplacian(std::span<const double> values) const;

 private:
  double plm(int i, int l, int m) const { return plm_[(static_cast<std::size_t>(i) * (mmax_ + 1) + m) * (lmax_ + 1) + l]; }

  int ntheta_;
  int nphi_;
  int lmax_;
  int mmax_;
  std::vector<double> weights_;
  std::vector<double> plm_;  // [ring][m][l]
  std::vector<double> cos_;  // [m][j]
  std::vector<double> sin_;
};

}  // namespace kq
