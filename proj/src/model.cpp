#include "rfm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rfm/errors.hpp"

namespace rfm {
namespace {

constexpr double kMergeRelTol = 1e-12;
constexpr double kSupportRelTol = 1e-9;

struct EigenGroup {
  double value;
  std::vector<Eigen::Index> members;
};

// Groups (numerically) equal eigenvalues; groups come out in ascending order.
std::vector<EigenGroup> group_eigenvalues(const Eigen::VectorXd& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  std::vector<EigenGroup> groups;
  for (Eigen::Index idx : order) {
    const double v = values[idx];
    if (!groups.empty() &&
        std::abs(v - groups.back().value) <= kMergeRelTol * std::max(std::abs(v), 1e-300)) {
      groups.back().members.push_back(idx);
    } else {
      groups.push_back({v, {idx}});
    }
  }
  return groups;
}

SpectralModel spectrum_from_groups(const std::vector<EigenGroup>& groups, Eigen::Index n) {
  if (groups.size() == 1) return SpectralModel::isotropic(groups.front().value);
  std::vector<SpectralAtom> atoms;
  atoms.reserve(groups.size());
  for (const auto& g : groups) {
    atoms.push_back({g.value, static_cast<double>(g.members.size()) / static_cast<double>(n)});
  }
  // Renormalize the last weight so the sum is exactly representable as 1.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) head += atoms[i].weight;
  atoms.back().weight = 1.0 - head;
  return SpectralModel::discrete(std::move(atoms));
}

bool in_support(const SpectralModel& s, double value) {
  auto close = [value](double v) { return std::abs(v - value) <= kSupportRelTol * std::abs(v); };
  switch (s.kind()) {
    case SpectrumKind::Isotropic:
      return close(s.scale());
    case SpectrumKind::Discrete:
      return std::any_of(s.eigenvalues().begin(), s.eigenvalues().end(),
                         [&](const SpectralAtom& a) { return close(a.value); });
    case SpectrumKind::PowerLaw:
      return value >= s.min_eigenvalue() * (1 - kSupportRelTol) &&
             value <= s.max_eigenvalue() * (1 + kSupportRelTol);
  }
  return false;
}

void check_estimator(const Estimator& e) {
  if (e.kind == Estimator::Kind::Ridge && !(std::isfinite(e.lambda) && e.lambda > 0.0)) {
    throw InputError("ridge estimator needs lambda > 0, got " + std::to_string(e.lambda));
  }
}

void check_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw InputError("need at least one aspect ratio (alpha_0)");
  for (std::size_t l = 0; l < alphas.size(); ++l) {
    if (!std::isfinite(alphas[l]) || alphas[l] <= 0.0) {
      throw InputError("alpha_" + std::to_string(l) + " must be positive and finite");
    }
  }
}

void check_noise(double noise_var) {
  if (!std::isfinite(noise_var) || noise_var < 0.0) {
    throw InputError("noise_var must be finite and non-negative");
  }
}

}  // namespace

// ---- Covariance ------------------------------------------------------------

Covariance Covariance::identity(Eigen::Index n) { return diagonal(Eigen::VectorXd::Ones(n)); }

Covariance Covariance::diagonal(Eigen::VectorXd diag) {
  Covariance c;
  c.is_diagonal_ = true;
  c.diag_ = std::move(diag);
  return c;
}

Covariance Covariance::dense(Eigen::MatrixXd matrix) {
  if (matrix.rows() != matrix.cols()) throw InputError("covariance matrix must be square");
  Covariance c;
  c.is_diagonal_ = false;
  c.matrix_ = std::move(matrix);
  return c;
}

Eigen::MatrixXd Covariance::to_dense() const {
  if (is_diagonal_) return diag_.asDiagonal();
  return matrix_;
}

void Covariance::check_positive_definite(const std::string& label) const {
  if (dim() == 0) throw InputError(label + " is empty");
  if (is_diagonal_) {
    for (Eigen::Index i = 0; i < diag_.size(); ++i) {
      if (!std::isfinite(diag_[i]) || diag_[i] <= 0.0) {
        throw InputError(label + " is not positive definite (diagonal entry " + std::to_string(i) +
                         " = " + std::to_string(diag_[i]) + ")");
      }
    }
    return;
  }
  if (!matrix_.allFinite()) throw InputError(label + " has non-finite entries");
  const double scale = std::max(matrix_.cwiseAbs().maxCoeff(), 1e-300);
  if ((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InputError(label + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw InputError(label + " is not positive definite (min eigenvalue " +
                     std::to_string(es.eigenvalues().minCoeff()) + ")");
  }
}

Covariance Covariance::sqrt() const {
  if (is_diagonal_) return diagonal(diag_.cwiseSqrt());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix_);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd m = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return dense(0.5 * (m + m.transpose()));
}

Covariance Covariance::inverse_sqrt() const {
  if (is_diagonal_) return diagonal(diag_.cwiseSqrt().cwiseInverse());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix_);
  const Eigen::VectorXd root = es.eigenvalues().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd m = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return dense(0.5 * (m + m.transpose()));
}

Eigen::VectorXd Covariance::eigenvalues() const {
  if (is_diagonal_) return diag_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Eigen::MatrixXd Covariance::left_multiply(const Eigen::MatrixXd& m) const {
  if (is_diagonal_) return diag_.asDiagonal() * m;
  return matrix_ * m;
}

Eigen::MatrixXd Covariance::right_multiply(const Eigen::MatrixXd& m) const {
  if (is_diagonal_) return m * diag_.asDiagonal();
  return m * matrix_;
}

Eigen::VectorXd Covariance::apply(const Eigen::VectorXd& v) const {
  if (is_diagonal_) return diag_.cwiseProduct(v);
  return matrix_ * v;
}

double Covariance::trace_product(const Eigen::MatrixXd& m) const {
  if (is_diagonal_) return diag_.dot(m.diagonal());
  return matrix_.cwiseProduct(m.transpose()).sum();
}

double Covariance::quadratic_form(const Eigen::VectorXd& v) const {
  if (is_diagonal_) return v.cwiseAbs2().dot(diag_);
  return v.dot(matrix_ * v);
}

bool Covariance::operator==(const Covariance& other) const {
  if (is_diagonal_ != other.is_diagonal_) return false;
  if (is_diagonal_) return diag_.size() == other.diag_.size() && diag_ == other.diag_;
  return matrix_.rows() == other.matrix_.rows() && matrix_.cols() == other.matrix_.cols() &&
         matrix_ == other.matrix_;
}

// ---- configs ----------------------------------------------------------------

void ModelConfig::validate() const {
  check_alphas(alphas);
  if (spectra.size() != alphas.size()) {
    throw InputError("need one spectrum per layer: " + std::to_string(alphas.size()) +
                     " alphas but " + std::to_string(spectra.size()) + " spectra");
  }
  check_noise(noise_var);
  check_estimator(estimator);
  if (target.kind() == TargetKind::WeightedDensity) {
    for (const auto& atom : target.density()) {
      if (!in_support(spectra.front(), atom.value)) {
        throw InputError("weighted-density eigenvalue " + std::to_string(atom.value) +
                         " is not in the support of the layer-0 spectrum");
      }
    }
  }
}

void RawConfig::validate() const {
  if (sigmas.empty()) throw InputError("raw config needs at least Sigma_0");
  if (gammas.size() != sigmas.size()) {
    throw InputError("raw config needs one Gamma per Sigma (Gamma_1..Gamma_{L+1})");
  }
  if (alphas.size() != sigmas.size()) {
    throw InputError("raw config needs one alpha per layer");
  }
  check_alphas(alphas);
  check_noise(noise_var);
  check_estimator(estimator);
  for (std::size_t l = 0; l < sigmas.size(); ++l) {
    if (gammas[l].dim() != sigmas[l].dim()) {
      throw InputError("Gamma_" + std::to_string(l + 1) + " and Sigma_" + std::to_string(l) +
                       " must both have dimension n_" + std::to_string(l));
    }
    gammas[l].check_positive_definite("Gamma_" + std::to_string(l + 1) + " (layer " +
                                      std::to_string(l) + ")");
    sigmas[l].check_positive_definite("Sigma_" + std::to_string(l) + " (layer " +
                                      std::to_string(l) + ")");
  }
  if (teacher.size() != sigmas.front().dim()) {
    throw InputError("teacher length must equal n_0 = " + std::to_string(sigmas.front().dim()));
  }
  if (!teacher.allFinite()) throw InputError("teacher has non-finite entries");
}

bool RawConfig::operator==(const RawConfig& other) const {
  return gammas == other.gammas && sigmas == other.sigmas &&
         teacher.size() == other.teacher.size() && teacher == other.teacher &&
         alphas == other.alphas && noise_var == other.noise_var && estimator == other.estimator;
}

TransformedFactors transform_matrices(const RawConfig& raw) {
  raw.validate();
  TransformedFactors out;
  for (std::size_t l = 0; l < raw.sigmas.size(); ++l) {
    const Covariance& gamma = raw.gammas[l];
    const Covariance& sigma = raw.sigmas[l];
    if (gamma.is_diagonal() && sigma.is_diagonal()) {
      out.sigmas.push_back(Covariance::diagonal(gamma.diag().cwiseProduct(sigma.diag())));
      continue;
    }
    const Covariance root = gamma.sqrt();
    Eigen::MatrixXd m = root.left_multiply(root.right_multiply(sigma.to_dense()));
    out.sigmas.push_back(Covariance::dense(0.5 * (m + m.transpose())));
  }
  out.teacher = raw.gammas.front().inverse_sqrt().apply(raw.teacher);
  return out;
}

SpectralModel spectrum_of(const Covariance& c) {
  return spectrum_from_groups(group_eigenvalues(c.eigenvalues()), c.dim());
}

ModelConfig transform(const RawConfig& raw) {
  const TransformedFactors tf = transform_matrices(raw);
  ModelConfig cfg;
  cfg.alphas = raw.alphas;
  cfg.noise_var = raw.noise_var;
  cfg.estimator = raw.estimator;

  // Layer 0 also carries the teacher, expressed in its eigenbasis.
  const Covariance& s0 = tf.sigmas.front();
  const Eigen::Index n0 = s0.dim();
  Eigen::VectorXd values;
  Eigen::VectorXd coeffs;
  if (s0.is_diagonal()) {
    values = s0.diag();
    coeffs = tf.teacher;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s0.to_dense());
    values = es.eigenvalues();
    coeffs = es.eigenvectors().transpose() * tf.teacher;
  }
  const auto groups = group_eigenvalues(values);
  cfg.spectra.push_back(spectrum_from_groups(groups, n0));
  for (std::size_t l = 1; l < tf.sigmas.size(); ++l) cfg.spectra.push_back(spectrum_of(tf.sigmas[l]));

  std::vector<SpectralAtom> density;
  density.reserve(groups.size());
  for (const auto& g : groups) {
    double mass = 0.0;
    for (Eigen::Index i : g.members) mass += coeffs[i] * coeffs[i];
    density.push_back({g.value, mass / static_cast<double>(n0)});
  }
  cfg.target = TargetModel::weighted_density(std::move(density));
  cfg.validate();
  return cfg;
}

// ---- regimes ----------------------------------------------------------------

Regime classify(const std::vector<double>& alphas, double tol) {
  check_alphas(alphas);
  if (!(tol > 0.0)) throw InputError("regime tolerance must be positive");
  Regime r;
  r.alpha_min = std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l < alphas.size(); ++l) {
    if (alphas[l] < r.alpha_min) {
      r.alpha_min = alphas[l];
      r.argmin = l;
    }
  }
  const double a0 = alphas.front();
  const double am = r.alpha_min;
  if (a0 > 1.0 + tol && am > 1.0 + tol) {
    r.tag = RegimeTag::Overparameterized;
  } else if (am < 1.0 - tol && am < a0 - tol) {
    r.tag = RegimeTag::Bottlenecked;
  } else if (a0 < 1.0 - tol && a0 < am - tol) {
    r.tag = RegimeTag::Overdetermined;
  } else {
    r.tag = RegimeTag::Boundary;
  }
  return r;
}

std::string to_string(RegimeTag tag) {
  switch (tag) {
    case RegimeTag::Overparameterized: return "Overparameterized";
    case RegimeTag::Bottlenecked: return "Bottlenecked";
    case RegimeTag::Overdetermined: return "Overdetermined";
    case RegimeTag::Boundary: return "Boundary";
  }
  return "Boundary";
}

std::optional<RegimeTag> regime_from_string(const std::string& name) {
  for (RegimeTag t : {RegimeTag::Overparameterized, RegimeTag::Bottlenecked,
                      RegimeTag::Overdetermined, RegimeTag::Boundary}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

}  // namespace rfm
