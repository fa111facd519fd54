#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace branchtail {
namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: need >= 2 points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / double(n), my = sy / double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissa");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

struct QuadFit {
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;
  double r2 = 0.0;
};

// least squares y = c2 x^2 + c1 x + c0, centered for conditioning
inline QuadFit fit_quadratic(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3) throw std::invalid_argument("fit_quadratic: need >= 3 points");
  double mx = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i];
  mx /= double(n);

  double s0 = double(n), s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double t0 = 0, t1 = 0, t2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i] - mx;
    const double u2 = u * u;
    s1 += u;
    s2 += u2;
    s3 += u2 * u;
    s4 += u2 * u2;
    t0 += y[i];
    t1 += u * y[i];
    t2 += u2 * y[i];
  }
  // solve the 3x3 normal equations by Cramer's rule
  const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s2 * s3) +
                     s2 * (s1 * s3 - s2 * s2);
  if (det == 0.0) throw std::invalid_argument("fit_quadratic: singular system");
  const double a0 = (t0 * (s2 * s4 - s3 * s3) - s1 * (t1 * s4 - t2 * s3) +
                     s2 * (t1 * s3 - t2 * s2)) /
                    det;
  const double a1 = (s0 * (t1 * s4 - t2 * s3) - t0 * (s1 * s4 - s2 * s3) +
                     s2 * (s1 * t2 - s2 * t1)) /
                    det;
  const double a2 = (s0 * (s2 * t2 - s3 * t1) - s1 * (s1 * t2 - s3 * t0) +
                     t0 * (s1 * s3 - s2 * s2)) /
                    det;
  // un-center: y = a2 (x-mx)^2 + a1 (x-mx) + a0
  QuadFit f;
  f.c2 = a2;
  f.c1 = a1 - 2.0 * a2 * mx;
  f.c0 = a0 - a1 * mx + a2 * mx * mx;

  double ss_res = 0, ss_tot = 0, my = t0 / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i] - mx;
    const double fit = a2 * u * u + a1 * u + a0;
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  f.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

}  // namespace detail
}  // namespace branchtail
