#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace kq {

/// Pairwise (cascade) summation. The recursion splits at fixed midpoints, so
/// the result depends only on the input order, never on threading.
double pairwise_sum(std::span<const double> values);

/// Pairwise sum of weights[i] * values[i].
double weighted_sum(std::span<const double> weights, std::span<const double> values);

struct GaussLegendre {
  std::vector<double> nodes;    // ascending, in (-1, 1)
  std::vector<double> weights;  // sum to 2
};

/// n-point Gauss-Legendre rule on [-1, 1].
GaussLegendre gauss_legendre(int n);

/// Legendre polynomial P_l(x).
double legendre(int l, double x);

/// Derivative P_l'(x).
double legendre_derivative(int l, double x);

/// Binomial coefficient as a double (exact for the sizes used here).
double binomial(int n, int k);

/// k! / (a! b! (k-a-b)!).
double multinomial(int k, int a, int b);

/// 64-bit FNV-1a over raw bytes; used for config hashes and cache checksums.
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::string_view text);

}  // namespace kq
