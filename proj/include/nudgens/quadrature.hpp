#pragma once

// Symmetric quadrature on the reference triangle and Gauss rules on [0,1].
// Triangle weights are normalized to sum to 1: a physical integral over a
// cell of area A is  A * sum_q w_q f(x_q).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace nudgens {

struct QuadraturePoint {
  double l0, l1, l2;  // barycentric coordinates
  double w;
};

struct QuadratureRule {
  int degree = 0;  // exact for polynomials up to this total degree
  std::vector<QuadraturePoint> points;
};

// n-point Gauss-Legendre rule mapped to [0,1]; weights sum to 1.
inline std::vector<std::pair<double, double>> gauss_legendre_01(int n) {
  std::vector<std::pair<double, double>> pts(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration from Chebyshev initial guess on [-1,1].
    double x = -std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    pts[i] = {0.5 * (x + 1.0), 0.5 * w};
  }
  return pts;
}

namespace detail {

inline QuadratureRule make_midpoint_rule() {
  QuadratureRule r;
  r.degree = 2;
  r.points = {{0.5, 0.5, 0.0, 1.0 / 3.0},
              {0.0, 0.5, 0.5, 1.0 / 3.0},
              {0.5, 0.0, 0.5, 1.0 / 3.0}};
  return r;
}

// Radon 7-point rule, exact to degree 5 (closed-form constants).
inline QuadratureRule make_degree5_rule() {
  const double s15 = std::sqrt(15.0);
  const double a = (6.0 - s15) / 21.0, wa = (155.0 - s15) / 1200.0;
  const double b = (6.0 + s15) / 21.0, wb = (155.0 + s15) / 1200.0;
  QuadratureRule r;
  r.degree = 5;
  r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0});
  auto push_orbit = [&r](double a, double w) {
    const double c = 1.0 - 2.0 * a;
    r.points.push_back({c, a, a, w});
    r.points.push_back({a, c, a, w});
    r.points.push_back({a, a, c, w});
  };
  push_orbit(a, wa);
  push_orbit(b, wb);
  return r;
}

// Duffy (collapsed-square) product of two n-point Gauss rules; exact to
// degree 2n-2. All weights positive.
inline QuadratureRule make_duffy_rule(int n) {
  const auto gl = gauss_legendre_01(n);
  QuadratureRule r;
  r.degree = 2 * n - 2;
  for (const auto& [eta, weta] : gl) {
    for (const auto& [xi, wxi] : gl) {
      const double x = xi * (1.0 - eta);  // l1
      const double y = eta;               // l2
      r.points.push_back({1.0 - x - y, x, y, 2.0 * wxi * weta * (1.0 - eta)});
    }
  }
  return r;
}

}  // namespace detail

// Cheapest stock rule exact at least to the requested degree.
inline const QuadratureRule& triangle_rule(int min_degree) {
  static const QuadratureRule deg2 = detail::make_midpoint_rule();
  static const QuadratureRule deg5 = detail::make_degree5_rule();
  static const QuadratureRule deg8 = detail::make_duffy_rule(5);
  static const QuadratureRule deg12 = detail::make_duffy_rule(7);
  if (min_degree <= 2) return deg2;
  if (min_degree <= 5) return deg5;
  if (min_degree <= 8) return deg8;
  if (min_degree <= 12) return deg12;
  throw std::invalid_argument("triangle_rule: no rule of degree " + std::to_string(min_degree));
}

}  // namespace nudgens
