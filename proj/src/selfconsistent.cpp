#include "rfm/selfconsistent.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "rfm/errors.hpp"

namespace rfm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBracketCap = 1e9;

// Runs TOMS 748 on an increasing function f with f(lo) < 0 < f(hi) and returns
// the midpoint of the final bracket. The search variable is log-scaled by the
// callers, so a width of rel_tol is a relative tolerance on the root.
template <class F>
double find_root(F&& f, double lo, double hi, double f_lo, double f_hi, const SolverSettings& st,
                 const char* what) {
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  auto tol = [&](double a, double b) { return std::abs(b - a) <= st.rel_tol; };
  std::uintmax_t iters = st.max_iters;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, tol, iters);
  if (iters >= st.max_iters && !tol(a, b)) {
    std::ostringstream msg;
    msg << what << ": no convergence after " << iters << " iterations (bracket [" << a << ", "
        << b << "])";
    throw ConvergenceError(msg.str());
  }
  return 0.5 * (a + b);
}

// Solves E[sigma/(kappa+sigma)] = target with complement = 1 - target supplied
// separately, so either side can be tiny without losing digits.
double solve_kappa_split(const SpectralModel& s, double target, double complement,
                         const SolverSettings& st) {
  if (s.kind() == SpectrumKind::Isotropic) return s.scale() * complement / target;

  const bool use_complement = complement < target;
  const double goal = use_complement ? complement : target;
  auto residual = [&](double u) {
    const double kappa = std::exp(u);
    const double r = use_complement ? neg_moment_complement(s, kappa) - complement
                                    : target - neg_moment(s, kappa);
    return std::abs(r) <= st.abs_tol * goal ? 0.0 : r;
  };

  double lo = std::log(0.5 * complement * s.min_eigenvalue() / target);
  double f_lo = residual(lo);
  while (f_lo > 0.0) {
    lo -= std::log(st.bracket_growth);
    f_lo = residual(lo);
  }

  const double mean = mean_eigenvalue(s);
  const double step = std::log(st.bracket_growth);
  double hi;
  double cap;
  if (std::isfinite(mean)) {
    hi = std::log(mean * complement / target);
    cap = hi + 64 * step;
  } else {
    hi = std::log(s.scale());
    cap = std::log(kBracketCap * s.scale());
  }
  double f_hi = residual(hi);
  while (f_hi < 0.0) {
    hi += step;
    if (hi > cap) {
      std::ostringstream msg;
      msg << "kappa bracket exceeded " << std::exp(cap) << " (target " << target << ")";
      throw ConvergenceError(msg.str());
    }
    f_hi = residual(hi);
  }
  if (lo >= hi) lo = hi - step;
  return std::exp(find_root(residual, lo, hi, f_lo, f_hi, st, "kappa solve"));
}

double zeta_ceiling(const std::vector<double>& alphas) {
  return std::min(1.0, *std::min_element(alphas.begin(), alphas.end()));
}

// Evaluates log lambda at a given gap g = zeta_ceiling - zeta; writes kappas.
double log_lambda_at_gap(const ModelConfig& config, double ceiling, double gap,
                         const SolverSettings& st, std::vector<double>& kappas) {
  const double zeta = ceiling - gap;
  double total = std::log((1.0 - ceiling) + gap) - std::log(zeta);
  kappas.resize(config.alphas.size());
  for (std::size_t l = 0; l < config.alphas.size(); ++l) {
    const double alpha = config.alphas[l];
    const double target = zeta / alpha;
    const double complement = ((alpha - ceiling) + gap) / alpha;
    kappas[l] = solve_kappa_split(config.spectra[l], target, complement, st);
    total += std::log(target) + std::log(kappas[l]);
  }
  return total;
}

}  // namespace

void SolverSettings::validate() const {
  if (!(rel_tol > 0.0 && std::isfinite(rel_tol))) throw InputError("solver rel_tol must be positive");
  if (!(abs_tol > 0.0 && std::isfinite(abs_tol))) throw InputError("solver abs_tol must be positive");
  if (max_iters < 10) throw InputError("solver max_iters must be at least 10");
  if (!(bracket_growth > 1.0 && std::isfinite(bracket_growth))) {
    throw InputError("solver bracket_growth must exceed 1");
  }
}

double solve_kappa(const SpectralModel& s, double ratio, const SolverSettings& st) {
  st.validate();
  if (std::isnan(ratio) || ratio <= 1.0) {
    throw DomainError("kappa equation needs ratio > 1, got " + std::to_string(ratio));
  }
  if (std::isinf(ratio)) return kInf;
  return solve_kappa_split(s, 1.0 / ratio, (ratio - 1.0) / ratio, st);
}

double compute_mu(const SpectralModel& s, double ratio, double kappa) {
  if (std::isinf(kappa)) return 1.0;
  // With ratio * E[s] = 1, 1 - ratio * E[s^2] equals ratio * E[s (1 - s)].
  const double mu = ratio * neg_moment_mixed(s, kappa);
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw NumericalError("mu = " + std::to_string(mu) + " is not positive; kappa " +
                         std::to_string(kappa) + " does not solve its equation");
  }
  return mu;
}

double compute_mu_ratio(const SpectralModel& s, double kappa) {
  if (std::isinf(kappa)) return 0.0;
  if (kappa == 0.0) return kInf;
  return neg_moment_sq(s, kappa) / neg_moment_mixed(s, kappa);
}

double zeta_equation_lambda(const ModelConfig& config, double zeta, const SolverSettings& st) {
  config.validate();
  const double ceiling = zeta_ceiling(config.alphas);
  if (!(zeta > 0.0 && zeta < ceiling)) {
    throw DomainError("zeta must lie in (0, " + std::to_string(ceiling) + ")");
  }
  std::vector<double> kappas;
  return std::exp(log_lambda_at_gap(config, ceiling, ceiling - zeta, st, kappas));
}

SaddleSolution solve_zeta(const ModelConfig& config, double lambda, const SolverSettings& st) {
  config.validate();
  st.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InputError("ridge lambda must be positive and finite");
  }
  const double ceiling = zeta_ceiling(config.alphas);
  const double log_lambda = std::log(lambda);

  // Search in u = log(gap); lambda(gap) is increasing, so f is too.
  // exp(log(x)) can round above x, so the gap is clamped below the ceiling.
  const double max_gap = ceiling * (1.0 - 2.0 * DBL_EPSILON);
  auto gap_of = [&](double u) { return std::min(std::exp(u), max_gap); };
  std::map<double, std::vector<double>> cache;
  auto f = [&](double u) {
    std::vector<double> kappas;
    const double value = log_lambda_at_gap(config, ceiling, gap_of(u), st, kappas) - log_lambda;
    cache[u] = std::move(kappas);
    return value;
  };

  const double hi = std::log(max_gap);
  const double f_hi = f(hi);
  if (std::isnan(f_hi)) throw NumericalError("zeta equation is undefined near zeta = 0");
  if (f_hi < 0.0) {
    std::ostringstream msg;
    msg << "zeta equation: no sign change; lambda(zeta=" << ceiling * DBL_EPSILON
        << ") = " << std::exp(f_hi + log_lambda) << " < requested " << lambda;
    throw ConvergenceError(msg.str());
  }
  double lo = std::log(ceiling * 1e-12);
  double f_lo = f(lo);
  while (f_lo > 0.0) {
    lo -= std::log(1e4);
    if (lo < std::log(1e-290)) {
      std::ostringstream msg;
      msg << "zeta equation: no sign change near zeta = " << ceiling << "; lambda(gap=1e-290) = "
          << std::exp(f_lo + log_lambda) << " > requested " << lambda;
      throw ConvergenceError(msg.str());
    }
    f_lo = f(lo);
  }

#ifndef NDEBUG
  {
    constexpr int kScan = 64;
    double previous = -kInf;
    for (int i = 0; i <= kScan; ++i) {
      const double u = lo + (hi - lo) * i / kScan;
      const double value = f(u);
      if (value < previous - 1e-9 * (1.0 + std::abs(previous))) {
        throw NumericalError("zeta equation is not monotone on the scan grid");
      }
      previous = value;
    }
  }
#endif

  const double u = find_root(f, lo, hi, f_lo, f_hi, st, "zeta solve");
  if (!cache.count(u)) f(u);
  const double residual = std::abs(std::expm1(f(u)));

  SaddleSolution sol;
  sol.gap = gap_of(u);
  sol.zeta = ceiling - sol.gap;
  sol.kappas = cache.at(u);
  sol.residual = residual;
  for (std::size_t l = 0; l < config.alphas.size(); ++l) {
    const auto& s = config.spectra[l];
    sol.mus.push_back(compute_mu(s, config.alphas[l] / sol.zeta, sol.kappas[l]));
    sol.mu_ratios.push_back(compute_mu_ratio(s, sol.kappas[l]));
  }
  return sol;
}

SaddleSolution solve_ridgeless(const ModelConfig& config, const Regime& regime,
                               const SolverSettings& st) {
  config.validate();
  st.validate();
  const std::size_t layers = config.alphas.size();
  double zeta = 1.0;
  switch (regime.tag) {
    case RegimeTag::Overparameterized: zeta = 1.0; break;
    case RegimeTag::Bottlenecked: zeta = regime.alpha_min; break;
    case RegimeTag::Overdetermined: zeta = config.alphas.front(); break;
    case RegimeTag::Boundary:
      throw BoundaryError("configuration sits on a phase boundary; the ridgeless error diverges");
  }

  SaddleSolution sol;
  sol.zeta = zeta;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& s = config.spectra[l];
    const double ratio = config.alphas[l] / zeta;
    if (ratio <= 1.0) {
      sol.kappas.push_back(0.0);
      sol.mus.push_back(0.0);
      sol.mu_ratios.push_back(kInf);
      continue;
    }
    const double kappa = solve_kappa(s, ratio, st);
    sol.kappas.push_back(kappa);
    sol.mus.push_back(compute_mu(s, ratio, kappa));
    sol.mu_ratios.push_back(compute_mu_ratio(s, kappa));
  }
  if (regime.tag == RegimeTag::Bottlenecked) sol.kappa_min = sol.kappas.front();
  return sol;
}

}  // namespace rfm
