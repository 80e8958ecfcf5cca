#pragma once

#include <array>

namespace speedprof::detail {

// 5-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree <= 9.
inline constexpr std::array<double, 5> kGaussNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                      0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights = {0.2369268850561891, 0.4786286704993665,
                                                        0.5688888888888889, 0.4786286704993665,
                                                        0.2369268850561891};

// Integrates f over [a, b] with the 5-point rule.
template <class F>
double gauss5(F&& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  double s = 0.0;
  for (std::size_t q = 0; q < kGaussNodes.size(); ++q) s += kGaussWeights[q] * f(mid + half * kGaussNodes[q]);
  return half * s;
}

}  // namespace speedprof::detail
