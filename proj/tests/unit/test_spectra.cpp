#include <doctest.h>

#include <cmath>
#include <random>

#include "rfm/errors.hpp"
#include "rfm/spectra.hpp"

using namespace rfm;

namespace {
SpectralModel two_atoms() { return SpectralModel::discrete({{1.0, 0.5}, {3.0, 0.5}}); }
}  // namespace

TEST_CASE("neg_moment fixtures") {
  CHECK(neg_moment(SpectralModel::isotropic(1.0), 0.0) == doctest::Approx(1.0));
  CHECK(neg_moment(SpectralModel::isotropic(1.0), 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  const double k = std::sqrt(3.0);
  const double direct = 0.5 * (1.0 / (1.0 + k) + 3.0 / (3.0 + k));
  CHECK(neg_moment(two_atoms(), k) == doctest::Approx(direct).epsilon(1e-14));
  CHECK(direct == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("neg_moment_sq fixtures") {
  CHECK(neg_moment_sq(two_atoms(), 0.0) == doctest::Approx(1.0));
  CHECK(neg_moment_sq(SpectralModel::isotropic(1.0), 1.0) == doctest::Approx(0.25));
  const double k = std::sqrt(3.0);
  const double a = 1.0 / (1.0 + k), b = 3.0 / (3.0 + k);
  CHECK(neg_moment_sq(two_atoms(), k) == doctest::Approx(0.5 * (a * a + b * b)).epsilon(1e-14));
  CHECK(neg_moment_sq(two_atoms(), k) == doctest::Approx(0.267949).epsilon(1e-6));
}

TEST_CASE("complement forms agree with the direct differences") {
  for (double k : {1e-3, 0.3, 2.0, 50.0}) {
    const auto s = two_atoms();
    CHECK(neg_moment_complement(s, k) == doctest::Approx(1.0 - neg_moment(s, k)).epsilon(1e-12));
    CHECK(neg_moment_mixed(s, k) == doctest::Approx(neg_moment(s, k) - neg_moment_sq(s, k)).epsilon(1e-12));
  }
}

TEST_CASE("moments") {
  CHECK(mean_eigenvalue(SpectralModel::isotropic(2.0)) == 2.0);
  CHECK(mean_eigenvalue(two_atoms()) == doctest::Approx(2.0));
  CHECK(second_moment(two_atoms()) == doctest::Approx(5.0));
  CHECK(std::isinf(mean_eigenvalue(SpectralModel::power_law(1.0, 1.0, 1000))));
  CHECK(std::isinf(second_moment(SpectralModel::power_law(1.0, 1.0, 1000))));
}

TEST_CASE("psi and its derivative") {
  const auto iso = SpectralModel::isotropic(1.0);
  const auto unit_teacher = TargetModel::weighted_density({{1.0, 1.0}});
  CHECK(psi(unit_teacher, iso, 1.0) == doctest::Approx(0.5));
  CHECK(psi_prime(unit_teacher, iso, 1.0) == doctest::Approx(-0.25));
  CHECK(psi(TargetModel::isotropic_average(), iso, 1.0) == doctest::Approx(0.5));

  const auto density = TargetModel::weighted_density({{1.0, 0.5}, {3.0, 0.5}});
  CHECK(psi(density, two_atoms(), std::sqrt(3.0)) == doctest::Approx(0.5).epsilon(1e-14));
  // Uniform mass reproduces neg_moment at every argument.
  for (double z : {0.01, 0.5, 1.0, 7.0}) {
    CHECK(psi(density, two_atoms(), z) == doctest::Approx(neg_moment(two_atoms(), z)).epsilon(1e-14));
    const double h = 1e-5 * z;
    const double fd = (psi(density, two_atoms(), z + h) - psi(density, two_atoms(), z - h)) / (2 * h);
    CHECK(psi_prime(density, two_atoms(), z) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("finite_spectrum") {
  const auto pl = finite_spectrum(SpectralModel::power_law(1.0, 1.0), 4);
  REQUIRE(pl.size() == 4);
  CHECK(pl[0] == doctest::Approx(16.0));
  CHECK(pl[1] == doctest::Approx(4.0));
  CHECK(pl[2] == doctest::Approx(16.0 / 9.0));
  CHECK(pl[3] == doctest::Approx(1.0));
  CHECK(finite_spectrum(SpectralModel::isotropic(2.0), 3) == std::vector<double>{2, 2, 2});
  CHECK(finite_spectrum(two_atoms(), 4) == std::vector<double>{3, 3, 1, 1});

  SUBCASE("largest remainder keeps the total") {
    const auto s = SpectralModel::discrete({{1.0, 1.0 / 3}, {2.0, 1.0 / 3}, {5.0, 1.0 / 3}});
    CHECK(finite_spectrum(s, 10).size() == 10);
    CHECK(finite_spectrum(s, 7).size() == 7);
  }
  SUBCASE("empirical neg_moment converges") {
    const auto s = SpectralModel::discrete({{0.5, 0.2}, {1.0, 0.3}, {4.0, 0.5}});
    const auto eig = finite_spectrum(s, 10000);
    for (double k : {0.1, 1.0, 10.0}) {
      double acc = 0;
      for (double e : eig) acc += e / (k + e);
      CHECK(acc / eig.size() == doctest::Approx(neg_moment(s, k)).epsilon(1e-3));
    }
  }
}

TEST_CASE("invariants over random discrete spectra") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.05, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SpectralAtom> atoms;
    double total = 0;
    for (int i = 0; i < 4; ++i) {
      atoms.push_back({u(gen), u(gen)});
      total += atoms.back().weight;
    }
    for (auto& a : atoms) a.weight /= total;
    const auto s = SpectralModel::discrete(atoms);
    const double tau = u(gen);
    const auto scaled = s.scaled(tau);
    double prev = 1.0 + 1e-15;
    for (double k = 1e-4; k < 1e6 * s.scale(); k *= 3.0) {
      const double m = neg_moment(s, k);
      CHECK(m < prev);
      prev = m;
      CHECK(neg_moment_sq(s, k) >= m * m - 1e-15);
      CHECK(neg_moment(scaled, tau * k) == doctest::Approx(m).epsilon(1e-12));
    }
  }
}

TEST_CASE("invalid spectra are rejected") {
  CHECK_THROWS_AS(SpectralModel::isotropic(0.0), InputError);
  CHECK_THROWS_AS(SpectralModel::isotropic(-1.0), InputError);
  CHECK_THROWS_AS(SpectralModel::discrete({}), InputError);
  CHECK_THROWS_AS(SpectralModel::discrete({{1.0, 0.4}, {2.0, 0.4}}), InputError);
  CHECK_THROWS_AS(SpectralModel::discrete({{-1.0, 0.5}, {2.0, 0.5}}), InputError);
  CHECK_THROWS_AS(SpectralModel::power_law(1.0, -0.5), InputError);
  CHECK_THROWS_AS(TargetModel::weighted_density({{1.0, -0.1}}), InputError);
}
