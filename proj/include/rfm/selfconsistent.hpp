#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rfm/model.hpp"
#include "rfm/spectra.hpp"

namespace rfm {

struct SolverSettings {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  std::size_t max_iters = 200;
  double bracket_growth = 2.0;

  void validate() const;
  bool operator==(const SolverSettings&) const = default;
};

/// Saddle-point scalars for one configuration. Collapsed layers (the
/// bottleneck, or layer 0 when overdetermined) carry kappa = mu = 0 and an
/// infinite mu_ratio.
struct SaddleSolution {
  double zeta = 1.0;
  /// min(1, alphas) - zeta, kept separately because zeta can sit within
  /// rounding of its upper limit when the ridge is tiny.
  double gap = 0.0;
  std::vector<double> kappas;
  std::vector<double> mus;
  /// (1 - mu) / mu for each layer, computed without cancellation.
  std::vector<double> mu_ratios;
  std::optional<double> kappa_min;
  /// Relative residual of the outer equation (0 for closed-form regimes).
  double residual = 0.0;
};

/// Unique kappa >= 0 with E[sigma / (kappa + sigma)] = 1 / ratio.
/// ratio = +inf gives +inf. Throws DomainError for ratio <= 1.
double solve_kappa(const SpectralModel& s, double ratio, const SolverSettings& st = {});

/// mu = 1 - ratio * E[(sigma / (kappa + sigma))^2] for kappa solved at `ratio`.
double compute_mu(const SpectralModel& s, double ratio, double kappa);

/// (1 - mu) / mu for kappa solved at any ratio.
double compute_mu_ratio(const SpectralModel& s, double kappa);

/// Finite-ridge saddle point: zeta and the per-layer kappa(zeta), mu(zeta).
SaddleSolution solve_zeta(const ModelConfig& config, double lambda, const SolverSettings& st = {});

/// Ridgeless saddle point for the regime selected by `regime`.
/// Throws BoundaryError for RegimeTag::Boundary.
SaddleSolution solve_ridgeless(const ModelConfig& config, const Regime& regime,
                               const SolverSettings& st = {});

/// Right-hand side of the outer equation: ((1 - zeta) / zeta) prod_l (zeta / alpha_l) kappa_l(zeta).
/// Mostly useful for diagnostics and tests.
double zeta_equation_lambda(const ModelConfig& config, double zeta, const SolverSettings& st = {});

}  // namespace rfm
