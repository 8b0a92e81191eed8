#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

namespace rfm {

enum class SpectrumKind { Isotropic, Discrete, PowerLaw };

/// One point mass of a spectral distribution. For a SpectralModel the weight
/// is a probability; for a TargetModel it is the teacher mass rho.
struct SpectralAtom {
  double value = 0.0;
  double weight = 0.0;
  bool operator==(const SpectralAtom&) const = default;
};

/// Number of grid eigenvalues used to evaluate power-law expectations.
inline constexpr std::size_t kDefaultPowerLawResolution = 100000;

/// Limiting eigenvalue distribution of one (transformed) covariance matrix.
///
/// Power laws follow the finite-size definition sigma_j = scale * (n/j)^(1+exponent),
/// j = 1..n. Expectations over a power law are evaluated on that grid with
/// n = resolution(); this discretization is the reference for every theory
/// path. The lower edge (sigma_n = scale) is held fixed as n grows, so the
/// limiting law is normalizable but has no finite moments.
class SpectralModel {
 public:
  static SpectralModel isotropic(double scale);
  static SpectralModel discrete(std::vector<SpectralAtom> atoms);
  static SpectralModel power_law(double scale, double exponent,
                                 std::size_t resolution = kDefaultPowerLawResolution);

  SpectrumKind kind() const { return kind_; }
  /// Isotropic: the eigenvalue. PowerLaw: the lower-edge scale. Discrete: the mean.
  double scale() const { return scale_; }
  double exponent() const { return exponent_; }
  std::size_t resolution() const { return resolution_; }
  /// Discrete: the atoms as given (after validation). Empty for other kinds.
  const std::vector<SpectralAtom>& eigenvalues() const { return declared_; }

  double min_eigenvalue() const;
  double max_eigenvalue() const;

  /// The same distribution with every eigenvalue multiplied by tau.
  SpectralModel scaled(double tau) const;

  /// E[f(sigma)] with compensated summation over the quadrature atoms.
  template <class F>
  double expect(F&& f) const {
    double sum = 0.0;
    double comp = 0.0;
    for (const auto& atom : *atoms_) {
      const double term = atom.weight * f(atom.value);
      const double t = sum + term;
      if (std::abs(sum) >= std::abs(term)) {
        comp += (sum - t) + term;
      } else {
        comp += (term - t) + sum;
      }
      sum = t;
    }
    return sum + comp;
  }

  bool operator==(const SpectralModel& other) const;

 private:
  SpectralModel() = default;

  SpectrumKind kind_ = SpectrumKind::Isotropic;
  double scale_ = 1.0;
  double exponent_ = 0.0;
  std::size_t resolution_ = 0;
  std::vector<SpectralAtom> declared_;
  // Quadrature atoms shared between copies; immutable after construction.
  std::shared_ptr<const std::vector<SpectralAtom>> atoms_;
};

enum class TargetKind { IsotropicAverage, WeightedDensity };

/// Teacher description in the eigenbasis of the transformed data covariance.
class TargetModel {
 public:
  /// Average over teachers drawn from N(0, I).
  static TargetModel isotropic_average();
  /// Point masses (eigenvalue sigma_0, mass rho); masses sum to |w|^2 / n0.
  static TargetModel weighted_density(std::vector<SpectralAtom> density);

  TargetKind kind() const { return kind_; }
  const std::vector<SpectralAtom>& density() const { return density_; }
  double total_mass() const;

  bool operator==(const TargetModel&) const = default;

 private:
  TargetKind kind_ = TargetKind::IsotropicAverage;
  std::vector<SpectralAtom> density_;
};

/// E[sigma / (kappa + sigma)] = -M(-kappa). Equals 1 at kappa = 0.
double neg_moment(const SpectralModel& s, double kappa);
/// E[(sigma / (kappa + sigma))^2].
double neg_moment_sq(const SpectralModel& s, double kappa);
/// E[kappa / (kappa + sigma)] = 1 - neg_moment, without cancellation.
double neg_moment_complement(const SpectralModel& s, double kappa);
/// E[kappa sigma / (kappa + sigma)^2] = neg_moment - neg_moment_sq, without cancellation.
double neg_moment_mixed(const SpectralModel& s, double kappa);

/// E[sigma]; +infinity for power laws.
double mean_eigenvalue(const SpectralModel& s);
/// E[sigma^2]; +infinity for power laws.
double second_moment(const SpectralModel& s);

/// psi(z) = lim n0^-1 w^T Sigma (z + Sigma)^-1 w.
double psi(const TargetModel& t, const SpectralModel& s0, double z);
/// psi'(z) = -lim n0^-1 w^T Sigma (z + Sigma)^-2 w.
double psi_prime(const TargetModel& t, const SpectralModel& s0, double z);

/// Eigenvalues of an n x n matrix with this limiting spectrum, sorted descending.
/// Discrete multiplicities are rounded with the largest-remainder method.
std::vector<double> finite_spectrum(const SpectralModel& s, std::size_t n);

}  // namespace rfm
