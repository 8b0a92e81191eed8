#include "rfm/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rfm/errors.hpp"

namespace rfm {
namespace {

constexpr std::size_t kMaxResolution = 100'000'000;

void require_positive_finite(double x, const char* what) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw InputError(std::string(what) + " must be positive and finite, got " + std::to_string(x));
  }
}

void require_kappa(double kappa) {
  if (!std::isfinite(kappa) || kappa < 0.0) {
    throw InputError("kappa must be finite and non-negative, got " + std::to_string(kappa));
  }
}

void require_z(double z) {
  if (!std::isfinite(z) || z <= 0.0) {
    throw InputError("psi argument z must be positive and finite, got " + std::to_string(z));
  }
}

double neumaier_sum(const std::vector<SpectralAtom>& atoms, auto&& f) {
  double sum = 0.0;
  double comp = 0.0;
  for (const auto& a : atoms) {
    const double term = a.weight * f(a.value);
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

SpectralModel SpectralModel::isotropic(double scale) {
  require_positive_finite(scale, "isotropic scale");
  SpectralModel s;
  s.kind_ = SpectrumKind::Isotropic;
  s.scale_ = scale;
  s.atoms_ = std::make_shared<const std::vector<SpectralAtom>>(
      std::vector<SpectralAtom>{{scale, 1.0}});
  return s;
}

SpectralModel SpectralModel::discrete(std::vector<SpectralAtom> atoms) {
  if (atoms.empty()) throw InputError("discrete spectrum needs at least one eigenvalue");
  double total = 0.0;
  for (const auto& a : atoms) {
    require_positive_finite(a.value, "discrete eigenvalue");
    if (!std::isfinite(a.weight) || a.weight < 0.0) {
      throw InputError("discrete weights must be non-negative, got " + std::to_string(a.weight));
    }
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InputError("discrete weights must sum to 1 (sum = " + std::to_string(total) + ")");
  }
  SpectralModel s;
  s.kind_ = SpectrumKind::Discrete;
  s.declared_ = std::move(atoms);
  s.atoms_ = std::make_shared<const std::vector<SpectralAtom>>(s.declared_);
  s.scale_ = neumaier_sum(s.declared_, [](double v) { return v; });
  return s;
}

SpectralModel SpectralModel::power_law(double scale, double exponent, std::size_t resolution) {
  require_positive_finite(scale, "power-law scale");
  require_positive_finite(exponent, "power-law exponent");
  if (resolution == 0 || resolution > kMaxResolution) {
    throw InputError("power-law resolution must be in [1, 1e8], got " + std::to_string(resolution));
  }
  SpectralModel s;
  s.kind_ = SpectrumKind::PowerLaw;
  s.scale_ = scale;
  s.exponent_ = exponent;
  s.resolution_ = resolution;
  std::vector<SpectralAtom> grid(resolution);
  const double n = static_cast<double>(resolution);
  const double w = 1.0 / n;
  for (std::size_t j = 1; j <= resolution; ++j) {
    grid[j - 1] = {scale * std::pow(n / static_cast<double>(j), 1.0 + exponent), w};
  }
  s.atoms_ = std::make_shared<const std::vector<SpectralAtom>>(std::move(grid));
  return s;
}

double SpectralModel::min_eigenvalue() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& a : *atoms_) {
    if (a.weight > 0.0) m = std::min(m, a.value);
  }
  return m;
}

double SpectralModel::max_eigenvalue() const {
  double m = 0.0;
  for (const auto& a : *atoms_) {
    if (a.weight > 0.0) m = std::max(m, a.value);
  }
  return m;
}

SpectralModel SpectralModel::scaled(double tau) const {
  require_positive_finite(tau, "rescaling factor");
  switch (kind_) {
    case SpectrumKind::Isotropic:
      return isotropic(scale_ * tau);
    case SpectrumKind::PowerLaw:
      return power_law(scale_ * tau, exponent_, resolution_);
    case SpectrumKind::Discrete: {
      auto atoms = declared_;
      for (auto& a : atoms) a.value *= tau;
      return discrete(std::move(atoms));
    }
  }
  return *this;
}

bool SpectralModel::operator==(const SpectralModel& other) const {
  return kind_ == other.kind_ && scale_ == other.scale_ && exponent_ == other.exponent_ &&
         resolution_ == other.resolution_ && declared_ == other.declared_;
}

TargetModel TargetModel::isotropic_average() { return TargetModel{}; }

TargetModel TargetModel::weighted_density(std::vector<SpectralAtom> density) {
  if (density.empty()) throw InputError("weighted density needs at least one atom");
  for (const auto& a : density) {
    require_positive_finite(a.value, "weighted-density eigenvalue");
    if (!std::isfinite(a.weight) || a.weight < 0.0) {
      throw InputError("weighted-density masses must be non-negative, got " +
                       std::to_string(a.weight));
    }
  }
  TargetModel t;
  t.kind_ = TargetKind::WeightedDensity;
  t.density_ = std::move(density);
  return t;
}

double TargetModel::total_mass() const {
  if (kind_ == TargetKind::IsotropicAverage) return 1.0;
  return neumaier_sum(density_, [](double) { return 1.0; });
}

double neg_moment(const SpectralModel& s, double kappa) {
  require_kappa(kappa);
  return s.expect([kappa](double v) { return v / (kappa + v); });
}

double neg_moment_sq(const SpectralModel& s, double kappa) {
  require_kappa(kappa);
  return s.expect([kappa](double v) {
    const double r = v / (kappa + v);
    return r * r;
  });
}

double neg_moment_complement(const SpectralModel& s, double kappa) {
  require_kappa(kappa);
  return s.expect([kappa](double v) { return kappa / (kappa + v); });
}

double neg_moment_mixed(const SpectralModel& s, double kappa) {
  require_kappa(kappa);
  return s.expect([kappa](double v) {
    const double d = kappa + v;
    return (kappa / d) * (v / d);
  });
}

double mean_eigenvalue(const SpectralModel& s) {
  if (s.kind() == SpectrumKind::PowerLaw) return std::numeric_limits<double>::infinity();
  return s.expect([](double v) { return v; });
}

double second_moment(const SpectralModel& s) {
  if (s.kind() == SpectrumKind::PowerLaw) return std::numeric_limits<double>::infinity();
  return s.expect([](double v) { return v * v; });
}

double psi(const TargetModel& t, const SpectralModel& s0, double z) {
  require_z(z);
  if (t.kind() == TargetKind::IsotropicAverage) return neg_moment(s0, z);
  return neumaier_sum(t.density(), [z](double v) { return v / (z + v); });
}

double psi_prime(const TargetModel& t, const SpectralModel& s0, double z) {
  require_z(z);
  auto f = [z](double v) { return -v / ((z + v) * (z + v)); };
  if (t.kind() == TargetKind::IsotropicAverage) return s0.expect(f);
  return neumaier_sum(t.density(), f);
}

std::vector<double> finite_spectrum(const SpectralModel& s, std::size_t n) {
  if (n == 0) throw InputError("finite_spectrum needs n >= 1");
  std::vector<double> out;
  out.reserve(n);
  switch (s.kind()) {
    case SpectrumKind::Isotropic:
      out.assign(n, s.scale());
      break;
    case SpectrumKind::PowerLaw: {
      const double dn = static_cast<double>(n);
      for (std::size_t j = 1; j <= n; ++j) {
        out.push_back(s.scale() * std::pow(dn / static_cast<double>(j), 1.0 + s.exponent()));
      }
      break;
    }
    case SpectrumKind::Discrete: {
      const auto& atoms = s.eigenvalues();
      std::vector<std::size_t> mult(atoms.size());
      std::vector<double> rem(atoms.size());
      std::size_t assigned = 0;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const double exact = atoms[i].weight * static_cast<double>(n);
        mult[i] = static_cast<std::size_t>(std::floor(exact));
        rem[i] = exact - static_cast<double>(mult[i]);
        assigned += mult[i];
      }
      std::vector<std::size_t> order(atoms.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
      for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++mult[order[k % order.size()]];
      for (std::size_t i = 0; i < atoms.size(); ++i) out.insert(out.end(), mult[i], atoms[i].value);
      std::sort(out.begin(), out.end(), std::greater<>());
      break;
    }
  }
  return out;
}

}  // namespace rfm
