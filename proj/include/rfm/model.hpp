#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfm/spectra.hpp"

namespace rfm {

/// Symmetric positive-definite covariance, stored either as its diagonal
/// (fast path) or as a dense matrix.
class Covariance {
 public:
  static Covariance identity(Eigen::Index n);
  static Covariance diagonal(Eigen::VectorXd diag);
  static Covariance dense(Eigen::MatrixXd matrix);

  Eigen::Index dim() const { return is_diagonal_ ? diag_.size() : matrix_.rows(); }
  bool is_diagonal() const { return is_diagonal_; }
  const Eigen::VectorXd& diag() const { return diag_; }
  Eigen::MatrixXd to_dense() const;

  /// Throws InputError (mentioning `label`) unless symmetric positive definite.
  void check_positive_definite(const std::string& label) const;

  Covariance sqrt() const;
  Covariance inverse_sqrt() const;
  Eigen::VectorXd eigenvalues() const;

  Eigen::MatrixXd left_multiply(const Eigen::MatrixXd& m) const;   // C * m
  Eigen::MatrixXd right_multiply(const Eigen::MatrixXd& m) const;  // m * C
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// tr(C * m) for square m.
  double trace_product(const Eigen::MatrixXd& m) const;
  /// v^T C v.
  double quadratic_form(const Eigen::VectorXd& v) const;

  bool operator==(const Covariance& other) const;

 private:
  bool is_diagonal_ = true;
  Eigen::VectorXd diag_;
  Eigen::MatrixXd matrix_;
};

struct Estimator {
  enum class Kind { Ridgeless, Ridge, Gibbs };
  Kind kind = Kind::Ridgeless;
  double lambda = 0.0;  // Ridge only

  static Estimator ridgeless() { return {Kind::Ridgeless, 0.0}; }
  static Estimator ridge(double lambda) { return {Kind::Ridge, lambda}; }
  static Estimator gibbs() { return {Kind::Gibbs, 0.0}; }

  bool operator==(const Estimator&) const = default;
};

/// Problem in transformed coordinates (all input covariances identity).
/// Index 0 is the data layer; 1..L are the hidden feature layers.
struct ModelConfig {
  std::vector<double> alphas;           // n_l / p, l = 0..L
  std::vector<SpectralModel> spectra;   // transformed Sigma_l, l = 0..L
  TargetModel target = TargetModel::isotropic_average();
  double noise_var = 0.0;               // eta^2
  Estimator estimator;

  std::size_t depth() const { return alphas.empty() ? 0 : alphas.size() - 1; }
  /// Throws InputError on any broken invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Problem in raw coordinates: input covariances Gamma_1..Gamma_{L+1},
/// output covariances Sigma_0..Sigma_L and a concrete teacher.
struct RawConfig {
  std::vector<Covariance> gammas;  // gammas[l] is Gamma_{l+1}, dimension n_l
  std::vector<Covariance> sigmas;  // sigmas[l] is Sigma_l, dimension n_l
  Eigen::VectorXd teacher;         // w_*, length n_0
  std::vector<double> alphas;
  double noise_var = 0.0;
  Estimator estimator;

  std::size_t depth() const { return sigmas.empty() ? 0 : sigmas.size() - 1; }
  void validate() const;

  bool operator==(const RawConfig& other) const;
};

/// Transformed covariances and teacher, before reduction to spectra.
struct TransformedFactors {
  std::vector<Covariance> sigmas;  // Gamma_{l+1}^{1/2} Sigma_l Gamma_{l+1}^{1/2}
  Eigen::VectorXd teacher;         // Gamma_1^{-1/2} w_*
};

TransformedFactors transform_matrices(const RawConfig& raw);

/// Reduce a raw configuration to the equivalent transformed one: spectra of
/// the transformed covariances plus the teacher's weighted density in the
/// eigenbasis of the transformed data covariance.
ModelConfig transform(const RawConfig& raw);

/// Spectral model of the eigenvalues of a finite covariance (equal values merged).
SpectralModel spectrum_of(const Covariance& c);

enum class RegimeTag { Overparameterized, Bottlenecked, Overdetermined, Boundary };

struct Regime {
  RegimeTag tag = RegimeTag::Boundary;
  double alpha_min = 0.0;               // +inf when there are no hidden layers
  std::optional<std::size_t> argmin;    // hidden layer index (1..L) attaining alpha_min
};

inline constexpr double kDefaultRegimeTol = 1e-6;

Regime classify(const std::vector<double>& alphas, double tol = kDefaultRegimeTol);

std::string to_string(RegimeTag tag);
std::optional<RegimeTag> regime_from_string(const std::string& name);

}  // namespace rfm
