#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rfm/model.hpp"
#include "rfm/selfconsistent.hpp"

namespace rfm {

enum class Formula {
  FiniteRidge,
  RidgelessFixedTarget,
  RidgelessAveraged,
  PowerLawApprox,
  LargeWidthExpansion,
  Gibbs,
};

std::string to_string(Formula f);

struct TheoryOptions {
  SolverSettings solver;
  double regime_tol = kDefaultRegimeTol;
};

/// Asymptotic learning-curve value split into signal (teacher-dependent),
/// noise (proportional to eta^2) and Gibbs thermal parts.
struct TheoryResult {
  double epsilon = 0.0;
  double signal_term = 0.0;
  double noise_term = 0.0;
  double thermal_term = 0.0;
  Regime regime;
  SaddleSolution saddle;
  Formula formula_used = Formula::RidgelessFixedTarget;
  std::vector<std::string> notes;
};

/// Error of ridge regression at lambda = config.estimator.lambda > 0.
TheoryResult finite_ridge_error(const ModelConfig& config, const TheoryOptions& opts = {});

/// Ridgeless (minimum-norm) error using psi of the configured target.
/// With an isotropic-average target this coincides with averaged_error.
TheoryResult ridgeless_error(const ModelConfig& config, const TheoryOptions& opts = {});

/// Ridgeless error averaged over isotropic teachers; needs an IsotropicAverage target.
TheoryResult averaged_error(const ModelConfig& config, const TheoryOptions& opts = {});

/// Closed-form approximation for power-law spectra (isotropic-average target).
TheoryResult power_law_error(const ModelConfig& config, const TheoryOptions& opts = {});

/// sinc(pi / (1 + exponent))^-(1 + exponent).
double power_law_k(double exponent);
/// scale * {k (z^w - 1) + [2 + w (1 - k)] (1 - 1/z)} for z > 1, else 0.
double power_law_chi(double z, double scale, double exponent);

/// Ridgeless error plus the thermal variance of the zero-temperature Gibbs estimator.
TheoryResult gibbs_error(const ModelConfig& config, const TheoryOptions& opts = {});

/// First-order expansion in 1/alpha_l for wide hidden layers (ridgeless, or
/// Gibbs when the estimator is Gibbs). The remainder is O(alpha^-2).
TheoryResult large_width_error(const ModelConfig& config, const TheoryOptions& opts = {});

/// (structured error, error with hidden spectra replaced by isotropic ones);
/// the first is never below the second in the overparameterized regime.
std::pair<double, double> structure_penalty_check(const ModelConfig& config,
                                                  const TheoryOptions& opts = {});

/// Picks the formula matching the estimator and target kind.
TheoryResult evaluate(const ModelConfig& config, const TheoryOptions& opts = {});

}  // namespace rfm
