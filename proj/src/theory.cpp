#include "rfm/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/sinc.hpp>

#include "rfm/errors.hpp"

namespace rfm {
namespace {

double hidden_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t l = 1; l < v.size(); ++l) s += v[l];
  return s;
}

Regime checked_regime(const ModelConfig& config, const TheoryOptions& opts) {
  config.validate();
  Regime r = classify(config.alphas, opts.regime_tol);
  if (r.tag == RegimeTag::Boundary) {
    throw BoundaryError("alphas sit on a phase boundary (alpha_0 or alpha_min within " +
                        std::to_string(opts.regime_tol) + " of 1 or of each other)");
  }
  return r;
}

void finish(TheoryResult& r) { r.epsilon = r.signal_term + r.noise_term + r.thermal_term; }

double bottleneck_noise(double alpha_min, double eta2) { return alpha_min * eta2 / (1.0 - alpha_min); }

double thermal_product(const SaddleSolution& saddle, const std::vector<double>& alphas) {
  double prod = 1.0;
  for (std::size_t l = 0; l < alphas.size(); ++l) prod *= saddle.kappas[l] / alphas[l];
  return prod;
}

// Ridgeless pieces shared by the fixed-target and averaged routes.
TheoryResult ridgeless_common(const ModelConfig& config, const TheoryOptions& opts, bool averaged) {
  TheoryResult r;
  r.regime = checked_regime(config, opts);
  r.saddle = solve_ridgeless(config, r.regime, opts.solver);
  r.formula_used = averaged ? Formula::RidgelessAveraged : Formula::RidgelessFixedTarget;
  const double eta2 = config.noise_var;
  const double a0 = config.alphas.front();
  const auto& s0 = config.spectra.front();
  const auto& saddle = r.saddle;

  switch (r.regime.tag) {
    case RegimeTag::Overparameterized: {
      const double k0 = saddle.kappas[0];
      const double hidden = hidden_sum(saddle.mu_ratios);
      if (averaged) {
        r.signal_term = (1.0 + hidden) * k0 / a0;
      } else {
        r.signal_term = hidden * k0 * psi(config.target, s0, k0) -
                        k0 * k0 * psi_prime(config.target, s0, k0) / saddle.mus[0];
      }
      r.noise_term = (saddle.mu_ratios[0] + hidden) * eta2;
      break;
    }
    case RegimeTag::Bottlenecked: {
      const double am = r.regime.alpha_min;
      const double km = *saddle.kappa_min;
      r.signal_term = averaged ? am * km / a0 / (1.0 - am)
                               : km * psi(config.target, s0, km) / (1.0 - am);
      r.noise_term = bottleneck_noise(am, eta2);
      break;
    }
    case RegimeTag::Overdetermined:
      r.noise_term = a0 * eta2 / (1.0 - a0);
      break;
    case RegimeTag::Boundary:
      break;
  }
  finish(r);
  return r;
}

void require_target(const ModelConfig& config, TargetKind kind, const char* what) {
  if (config.target.kind() != kind) throw InputError(what);
}

}  // namespace

std::string to_string(Formula f) {
  switch (f) {
    case Formula::FiniteRidge: return "FiniteRidge";
    case Formula::RidgelessFixedTarget: return "RidgelessFixedTarget";
    case Formula::RidgelessAveraged: return "RidgelessAveraged";
    case Formula::PowerLawApprox: return "PowerLawApprox";
    case Formula::LargeWidthExpansion: return "LargeWidthExpansion";
    case Formula::Gibbs: return "Gibbs";
  }
  return "";
}

TheoryResult finite_ridge_error(const ModelConfig& config, const TheoryOptions& opts) {
  config.validate();
  if (config.estimator.kind != Estimator::Kind::Ridge) {
    throw InputError("finite_ridge_error needs a ridge estimator");
  }
  TheoryResult r;
  r.formula_used = Formula::FiniteRidge;
  r.regime = classify(config.alphas, opts.regime_tol);
  r.saddle = solve_zeta(config, config.estimator.lambda, opts.solver);
  const auto& saddle = r.saddle;
  const auto& s0 = config.spectra.front();
  const double ceiling = std::min(1.0, *std::min_element(config.alphas.begin(), config.alphas.end()));
  const double one_minus_zeta = (1.0 - ceiling) + saddle.gap;
  const double hidden = hidden_sum(saddle.mu_ratios);
  const double all = hidden + saddle.mu_ratios[0];
  const double k0 = saddle.kappas[0];
  const double denom = 1.0 + all * one_minus_zeta;
  r.signal_term = (hidden * k0 * psi(config.target, s0, k0) -
                   k0 * k0 * psi_prime(config.target, s0, k0) / saddle.mus[0]) /
                  denom;
  r.noise_term = all * saddle.zeta * config.noise_var / denom;
  finish(r);
  return r;
}

TheoryResult ridgeless_error(const ModelConfig& config, const TheoryOptions& opts) {
  return ridgeless_common(config, opts, false);
}

TheoryResult averaged_error(const ModelConfig& config, const TheoryOptions& opts) {
  config.validate();
  require_target(config, TargetKind::IsotropicAverage, "averaged_error needs an isotropic-average target");
  return ridgeless_common(config, opts, true);
}

double power_law_k(double exponent) {
  const double x = std::numbers::pi / (1.0 + exponent);
  return std::pow(boost::math::sinc_pi(x), -(1.0 + exponent));
}

double power_law_chi(double z, double scale, double exponent) {
  if (!(z > 1.0)) return 0.0;
  const double k = power_law_k(exponent);
  return scale * (k * (std::pow(z, exponent) - 1.0) + (2.0 + exponent * (1.0 - k)) * (1.0 - 1.0 / z));
}

TheoryResult power_law_error(const ModelConfig& config, const TheoryOptions& opts) {
  config.validate();
  require_target(config, TargetKind::IsotropicAverage,
                 "power-law approximation needs an isotropic-average target");
  for (const auto& s : config.spectra) {
    if (s.kind() != SpectrumKind::PowerLaw || !(s.exponent() > 0.0)) {
      throw InputError("power-law approximation needs power-law spectra with positive exponents");
    }
  }
  TheoryResult r;
  r.formula_used = Formula::PowerLawApprox;
  r.regime = checked_regime(config, opts);
  r.notes.push_back("closed-form approximation; compare with the discretized-spectrum reference");
  const double eta2 = config.noise_var;
  const auto& alphas = config.alphas;
  const double a0 = alphas.front();
  const double w0 = config.spectra.front().exponent();
  const double scale0 = config.spectra.front().scale();

  switch (r.regime.tag) {
    case RegimeTag::Overparameterized: {
      double omega_hidden = 0.0;
      double inv_hidden = 0.0;
      for (std::size_t l = 1; l < alphas.size(); ++l) {
        omega_hidden += config.spectra[l].exponent();
        inv_hidden += 1.0 / (alphas[l] - 1.0);
      }
      r.signal_term = (1.0 + omega_hidden + inv_hidden) * power_law_chi(a0, scale0, w0);
      r.noise_term = (w0 + omega_hidden + 1.0 / (a0 - 1.0) + inv_hidden) * eta2;
      break;
    }
    case RegimeTag::Bottlenecked: {
      const double am = r.regime.alpha_min;
      r.signal_term = power_law_chi(a0 / am, scale0, w0) / (1.0 - am);
      r.noise_term = bottleneck_noise(am, eta2);
      break;
    }
    case RegimeTag::Overdetermined:
      r.noise_term = a0 * eta2 / (1.0 - a0);
      break;
    case RegimeTag::Boundary:
      break;
  }
  finish(r);
  return r;
}

TheoryResult gibbs_error(const ModelConfig& config, const TheoryOptions& opts) {
  config.validate();
  TheoryResult r = ridgeless_common(config, opts, false);
  r.formula_used = Formula::Gibbs;
  if (r.regime.tag == RegimeTag::Overparameterized) {
    r.thermal_term = thermal_product(r.saddle, config.alphas);
  }
  finish(r);
  return r;
}

TheoryResult large_width_error(const ModelConfig& config, const TheoryOptions& opts) {
  config.validate();
  TheoryResult r;
  r.formula_used = Formula::LargeWidthExpansion;
  r.regime = checked_regime(config, opts);
  r.notes.push_back("first-order large-width expansion; remainder O(alpha_l^-2)");
  const auto& alphas = config.alphas;
  for (std::size_t l = 1; l < alphas.size(); ++l) {
    if (!(alphas[l] > 1.0)) throw InputError("large-width expansion needs every hidden alpha > 1");
    if (config.spectra[l].kind() == SpectrumKind::PowerLaw) {
      throw InputError("large-width expansion needs hidden spectra with finite moments; layer " +
                       std::to_string(l) + " is a power law");
    }
  }
  const double eta2 = config.noise_var;
  const double a0 = alphas.front();
  if (r.regime.tag == RegimeTag::Overdetermined) {
    r.noise_term = a0 * eta2 / (1.0 - a0);
    finish(r);
    return r;
  }
  if (!(a0 > 1.0)) throw DomainError("large-width expansion needs alpha_0 > 1 or alpha_0 < 1 < alpha_min");

  const auto& s0 = config.spectra.front();
  const double k0 = solve_kappa(s0, a0, opts.solver);
  const double mu0 = compute_mu(s0, a0, k0);
  const double ratio0 = compute_mu_ratio(s0, k0);
  double correction = 0.0;
  double mean_product = 1.0;
  SaddleSolution& saddle = r.saddle;
  saddle.zeta = 1.0;
  saddle.kappas.push_back(k0);
  saddle.mus.push_back(mu0);
  saddle.mu_ratios.push_back(ratio0);
  for (std::size_t l = 1; l < alphas.size(); ++l) {
    const double m1 = mean_eigenvalue(config.spectra[l]);
    const double m2 = second_moment(config.spectra[l]);
    const double c = m2 / (m1 * m1) / alphas[l];
    correction += c;
    mean_product *= m1;
    saddle.kappas.push_back(m1 * alphas[l] - m2 / m1);
    saddle.mus.push_back(1.0 - c);
    saddle.mu_ratios.push_back(c / (1.0 - c));
  }
  const double k0_psi = k0 * psi(config.target, s0, k0);
  r.signal_term = -k0 * k0 * psi_prime(config.target, s0, k0) / mu0 + correction * k0_psi;
  r.noise_term = (ratio0 + correction) * eta2;
  if (config.estimator.kind == Estimator::Kind::Gibbs) {
    r.thermal_term = k0 / a0 * mean_product * (1.0 - correction);
  }
  finish(r);
  return r;
}

std::pair<double, double> structure_penalty_check(const ModelConfig& config, const TheoryOptions& opts) {
  const TheoryResult exact = ridgeless_error(config, opts);
  if (exact.regime.tag != RegimeTag::Overparameterized) {
    throw DomainError("structure penalty bound applies only in the overparameterized regime");
  }
  const auto& s0 = config.spectra.front();
  const auto& saddle = exact.saddle;
  const double k0 = saddle.kappas[0];
  double isotropic_hidden = 0.0;
  for (std::size_t l = 1; l < config.alphas.size(); ++l) isotropic_hidden += 1.0 / (config.alphas[l] - 1.0);
  const double floor = isotropic_hidden * k0 * psi(config.target, s0, k0) -
                       k0 * k0 * psi_prime(config.target, s0, k0) / saddle.mus[0] +
                       (saddle.mu_ratios[0] + isotropic_hidden) * config.noise_var;
  return {exact.epsilon, floor};
}

TheoryResult evaluate(const ModelConfig& config, const TheoryOptions& opts) {
  switch (config.estimator.kind) {
    case Estimator::Kind::Ridge: return finite_ridge_error(config, opts);
    case Estimator::Kind::Gibbs: return gibbs_error(config, opts);
    case Estimator::Kind::Ridgeless:
      if (config.target.kind() == TargetKind::IsotropicAverage) return averaged_error(config, opts);
      return ridgeless_error(config, opts);
  }
  return ridgeless_error(config, opts);
}

}  // namespace rfm
