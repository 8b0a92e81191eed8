#pragma once

// Independent reference values used by the tests. Nothing here calls the
// library's solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

/// Unstructured data and weights, ridgeless, |w|^2 = n0.
inline double unstructured_ridgeless(const std::vector<double>& alphas, double eta) {
  const double a0 = alphas[0];
  double amin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l < alphas.size(); ++l) amin = std::min(amin, alphas[l]);
  if (a0 > 1 && amin > 1) {
    double hidden = 0.0;
    for (std::size_t l = 1; l < alphas.size(); ++l) hidden += 1.0 / (alphas[l] - 1.0);
    return (1.0 + hidden) * (1.0 - 1.0 / a0) + (hidden + 1.0 / (a0 - 1.0)) * eta * eta;
  }
  if (amin < 1 && amin < a0) return (1.0 - amin / a0) / (1.0 - amin) + amin / (1.0 - amin) * eta * eta;
  return a0 / (1.0 - a0) * eta * eta;
}

/// Plain bisection for a decreasing function on [lo, hi].
inline double bisect_decreasing(const std::function<double(double)>& f, double lo, double hi, double goal) {
  for (int i = 0; i < 400 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > goal ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Marchenko-Pastur Stieltjes transform m(z) = E[1/(s - z)] at z = -x < 0
/// for aspect ratio gamma and unit variance, with its z-derivative.
struct Stieltjes {
  double m;
  double dm;
};
inline Stieltjes marchenko_pastur(double gamma, double x) {
  const double z = -x;
  // gamma z m^2 + (z + gamma - 1) m + 1 = 0, positive root.
  const double a = gamma * z, b = z + gamma - 1.0;
  const double disc = std::sqrt(b * b - 4.0 * a);
  double m = (-b - disc) / (2.0 * a);
  if (m <= 0) m = (-b + disc) / (2.0 * a);
  const double dm = -(gamma * m * m + m) / (2.0 * gamma * z * m + b);
  return {m, dm};
}

/// Shallow isotropic ridge regression written in the conventions of the
/// classic random-design analysis: design Z = X / sqrt(n0) with
/// Z^T Z = S / gamma, S ~ MP(gamma), gamma = n0 / p. Returns the error
/// averaged over isotropic teachers with |w|^2 = n0.
inline double shallow_isotropic_ridge(double gamma, double lambda, double eta) {
  const auto st = marchenko_pastur(gamma, gamma * lambda);
  const double bias = gamma * gamma * lambda * lambda * st.dm;
  const double variance = gamma * st.m - lambda * gamma * gamma * st.dm;
  return bias + eta * eta * variance;
}

/// Mean of the inverse-Wishart noise term: eta^2 n / (p - n - 1).
inline double inverse_wishart_noise(double n, double p, double eta) { return eta * eta * n / (p - n - 1.0); }

}  // namespace oracle
