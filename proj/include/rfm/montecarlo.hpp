#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rfm/model.hpp"
#include "rfm/theory.hpp"

namespace rfm {

/// One finite-size experiment: sizes, problem description, estimator, seeds.
/// For a ModelConfig the matrices are diagonal with the finite-size
/// spectra, all Gamma are identity, and an isotropic-average target is
/// drawn afresh for every seed. `estimator` overrides the one stored in `model`.
struct ExperimentConfig {
  std::size_t n0 = 0;
  std::vector<std::size_t> hidden;  // n_1..n_L
  std::size_t p = 0;
  std::variant<ModelConfig, RawConfig> model;
  Estimator estimator;
  std::vector<std::uint64_t> seeds;
  /// Relative singular-value cutoff for the min-norm fit; default max(p, n_L) * eps.
  std::optional<double> rank_tol;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 1;
  /// Attach the asymptotic prediction evaluated at alpha_l = n_l / p.
  bool attach_theory = true;

  std::size_t depth() const { return hidden.size(); }
  void validate() const;
};

/// p = round(n0 / alpha_0), n_l = round(alpha_l * p).
struct Sizes {
  std::size_t n0 = 0;
  std::vector<std::size_t> hidden;
  std::size_t p = 0;
};
Sizes sizes_from_alphas(std::size_t n0, const std::vector<double>& alphas);

struct ExperimentResult {
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_errors;
  double mean = 0.0;
  /// Sample standard deviation over sqrt(#seeds); 0 for a single seed.
  double std_error = 0.0;
  bool single_seed = false;
  std::size_t n0 = 0;
  std::vector<std::size_t> hidden;
  std::size_t p = 0;
  std::optional<TheoryResult> theory;
  /// Why no theory was attached (e.g. the sizes sit on a phase boundary).
  std::string theory_note;
};

/// One or more seeds failed; carries (seed, message) for each.
class SeedFailureError : public std::runtime_error {
 public:
  explicit SeedFailureError(std::vector<std::pair<std::uint64_t, std::string>> failures);
  const std::vector<std::pair<std::uint64_t, std::string>>& failures() const { return failures_; }

 private:
  std::vector<std::pair<std::uint64_t, std::string>> failures_;
};

/// Random draws for one seed.
struct Instance {
  Eigen::MatrixXd X;                   // p x n0, rows ~ N(0, Sigma_0)
  std::vector<Eigen::MatrixXd> factors;  // U_l, n_{l-1} x n_l
  Eigen::VectorXd teacher;             // w_*, length n0
  Eigen::VectorXd noise;               // xi, length p
};

/// The finite raw matrices an experiment samples from. For a ModelConfig the
/// teacher is empty when it must be drawn per seed.
RawConfig finite_raw_config(const ExperimentConfig& cfg);

Instance sample_instance(const ExperimentConfig& cfg, std::uint64_t seed);
Instance sample_instance(const RawConfig& raw, std::size_t p, std::uint64_t seed);

/// F = U_1 ... U_L / sqrt(n_1 ... n_L); identity of size n0 when there are no factors.
Eigen::MatrixXd build_features(const std::vector<Eigen::MatrixXd>& factors, std::size_t n0);

/// v = n0^-1/2 (lambda Gamma^-1 + F^T X^T X F / n0)^-1 F^T X^T y.
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                          double lambda, const Covariance& gamma);

/// Minimum-norm least-squares solution of (X F / sqrt(n0)) v = y via SVD;
/// singular values below rank_tol * sigma_max count as zero. rank_tol <= 0
/// selects the default max(p, n_L) * eps.
Eigen::VectorXd fit_minnorm(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                            double rank_tol = 0.0);

/// (1/n0) || Sigma_0^{1/2} (F v - w) ||^2.
double empirical_error(const Eigen::VectorXd& v, const Eigen::MatrixXd& F, const Eigen::VectorXd& teacher,
                       const Covariance& sigma0);

/// Zero-temperature posterior variance (1/n0) tr[Sigma_0 F (I - P) F^T], with
/// P the projector onto the row space of X F. Zero when p >= min(n0, n_1..n_L).
double gibbs_thermal_trace(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, const Covariance& sigma0);

/// Empirical error for one seed through the full pipeline.
double run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TheoryOptions& opts = {});

}  // namespace rfm
