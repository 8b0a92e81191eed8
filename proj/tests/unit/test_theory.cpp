#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rfm/errors.hpp"
#include "rfm/theory.hpp"

using namespace rfm;

namespace {

SpectralModel iso(double s = 1.0) { return SpectralModel::isotropic(s); }
SpectralModel two_atoms() { return SpectralModel::discrete({{1.0, 0.5}, {3.0, 0.5}}); }

ModelConfig unstructured(std::vector<double> alphas, double eta, Estimator est = Estimator::ridgeless()) {
  ModelConfig c;
  c.alphas = alphas;
  c.spectra.assign(alphas.size(), iso());
  c.target = TargetModel::weighted_density({{1.0, 1.0}});
  c.noise_var = eta * eta;
  c.estimator = est;
  return c;
}

SpectralModel random_discrete(std::mt19937_64& gen, int atoms) {
  std::uniform_real_distribution<double> value(0.05, 10.0), weight(0.05, 1.0);
  std::vector<SpectralAtom> a;
  double total = 0;
  for (int i = 0; i < atoms; ++i) {
    a.push_back({value(gen), weight(gen)});
    total += a.back().weight;
  }
  for (auto& x : a) x.weight /= total;
  return SpectralModel::discrete(a);
}

}  // namespace

TEST_CASE("ridgeless closed-form fixtures") {
  CHECK(ridgeless_error(unstructured({2.0, 4.0}, 0.0)).epsilon == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(ridgeless_error(unstructured({2.0, 0.5}, 0.0)).epsilon == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(ridgeless_error(unstructured({0.5}, 0.5)).epsilon == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ridgeless_error(unstructured({0.5, 3.0, 2.0}, 0.5)).epsilon == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ridgeless_error(unstructured({2.0}, 0.0)).epsilon == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ridgeless matches the unstructured formula on a grid") {
  for (double a0 : {0.3, 0.8, 1.5, 3.0, 10.0}) {
    for (double a1 : {0.2, 0.7, 1.3, 4.0}) {
      for (double a2 : {0.5, 2.0, 9.0}) {
        for (double eta : {0.0, 0.5}) {
          const std::vector<double> alphas{a0, a1, a2};
          if (classify(alphas).tag == RegimeTag::Boundary) continue;
          const double expect = oracle::unstructured_ridgeless(alphas, eta);
          CHECK(ridgeless_error(unstructured(alphas, eta)).epsilon == doctest::Approx(expect).epsilon(1e-10));
          auto avg = unstructured(alphas, eta);
          avg.target = TargetModel::isotropic_average();
          CHECK(averaged_error(avg).epsilon == doctest::Approx(expect).epsilon(1e-10));
        }
      }
    }
  }
}

TEST_CASE("finite ridge fixtures") {
  auto c = unstructured({2.0}, 0.0, Estimator::ridge(0.5));
  CHECK(finite_ridge_error(c).epsilon == doctest::Approx((1.0 + std::sqrt(2.0)) / 4.0).epsilon(1e-10));
  c.estimator = Estimator::ridge(1e-8);
  CHECK(finite_ridge_error(c).epsilon == doctest::Approx(0.5).epsilon(1e-4));

  c.estimator = Estimator::ridge(0.3);
  c.target = TargetModel::isotropic_average();
  double prev = 1e300;
  for (double s : {1.0, 1e-2, 1e-4, 1e-6}) {
    c.spectra = {iso(s)};
    const double e = finite_ridge_error(c).epsilon;
    CHECK(e < prev);
    prev = e;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("shallow ridge agrees with the random-design oracle") {
  for (double a0 : {0.3, 0.9, 1.7, 4.0}) {
    for (double lam : {1e-3, 0.1, 1.0, 10.0}) {
      for (double eta : {0.0, 0.7}) {
        auto c = unstructured({a0}, eta, Estimator::ridge(lam));
        c.target = TargetModel::isotropic_average();
        CHECK(finite_ridge_error(c).epsilon ==
              doctest::Approx(oracle::shallow_isotropic_ridge(a0, lam, eta)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("ridge approaches ridgeless in every regime") {
  const std::vector<std::vector<double>> grid{
      {2.0, 4.0}, {3.0, 1.5, 2.0}, {1.2, 8.0}, {5.0}, {10.0, 30.0},        // overparameterized
      {2.0, 0.5}, {4.0, 0.3, 2.0}, {1.5, 0.8}, {3.0, 2.0, 0.6}, {6.0, 0.2},  // bottlenecked
      {0.5}, {0.5, 2.0}, {0.3, 0.9}, {0.8, 3.0, 1.5}, {0.2, 0.4},           // overdetermined
      {2.5, 3.5}, {0.6, 5.0}, {3.0, 0.4}, {1.8}, {0.7, 0.9, 4.0}};
  REQUIRE(grid.size() == 20);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ModelConfig c;
    c.alphas = grid[i];
    c.spectra.push_back(two_atoms());
    for (std::size_t l = 1; l < grid[i].size(); ++l) c.spectra.push_back(SpectralModel::discrete({{0.5, 0.4}, {2.0, 0.6}}));
    c.noise_var = (i % 2) ? 0.25 : 0.0;
    if (c.noise_var == 0.0 && classify(c.alphas).tag == RegimeTag::Overdetermined) c.noise_var = 0.09;
    const double ridgeless = ridgeless_error(c).epsilon;
    c.estimator = Estimator::ridge(1e-8);
    const double ridge = finite_ridge_error(c).epsilon;
    CHECK(std::abs(ridge - ridgeless) <= 1e-4 * std::abs(ridgeless));
  }
}

TEST_CASE("averaged error for a structured data spectrum") {
  ModelConfig c;
  c.alphas = {2.0};
  c.spectra = {two_atoms()};
  const auto r = averaged_error(c);
  CHECK(r.epsilon == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-10));
  CHECK(r.epsilon <= (1.0 - 1.0 / 2.0) * mean_eigenvalue(two_atoms()));
  c.target = TargetModel::weighted_density({{1.0, 0.5}});
  CHECK_THROWS_AS(averaged_error(c), InputError);
}

TEST_CASE("structured hidden weights with isotropic hidden spectra reduce to the simpler form") {
  ModelConfig c;
  c.alphas = {3.0, 2.0, 5.0};
  c.spectra = {two_atoms(), iso(), iso(2.0)};
  c.target = TargetModel::weighted_density({{1.0, 0.3}, {3.0, 0.9}});
  c.noise_var = 0.2;
  const double k0 = solve_kappa(two_atoms(), 3.0);
  const double mu0 = compute_mu(two_atoms(), 3.0, k0);
  const double hidden = 1.0 / (2.0 - 1.0) + 1.0 / (5.0 - 1.0);
  const double ps = psi(c.target, two_atoms(), k0), dps = psi_prime(c.target, two_atoms(), k0);
  const double expect = hidden * k0 * ps - k0 * k0 / mu0 * dps + ((1 - mu0) / mu0 + hidden) * c.noise_var;
  CHECK(ridgeless_error(c).epsilon == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("power-law helpers") {
  CHECK(power_law_k(1.0) == doctest::Approx(std::pow(std::numbers::pi / 2, 2)).epsilon(1e-14));
  const double k = power_law_k(1.0);
  CHECK(power_law_chi(2.0, 1.0, 1.0) == doctest::Approx(k + (3.0 - k) * 0.5).epsilon(1e-14));
  CHECK(power_law_chi(2.0, 1.0, 1.0) == doctest::Approx(2.733700).epsilon(1e-6));
  CHECK(power_law_chi(0.5, 1.0, 1.0) == 0.0);
}

TEST_CASE("power-law approximation against the discretized reference") {
  ModelConfig c;
  c.spectra = {SpectralModel::power_law(1.0, 1.0), SpectralModel::power_law(1.0, 1.0)};
  for (double inv : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    c.alphas = {1.0 / inv, 4.0 / inv};
    const double ref = averaged_error(c).epsilon;
    const double approx = power_law_error(c).epsilon;
    CHECK(std::abs(approx - ref) <= 0.10 * ref);
  }
  c.spectra[1] = iso();
  c.alphas = {2.0, 8.0};
  CHECK_THROWS_AS(power_law_error(c), InputError);
}

TEST_CASE("gibbs error") {
  const auto r = gibbs_error(unstructured({2.0, 4.0}, 0.0, Estimator::gibbs()));
  CHECK(r.epsilon == doctest::Approx(25.0 / 24.0).epsilon(1e-12));
  CHECK(r.thermal_term == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(gibbs_error(unstructured({2.0, 0.5}, 0.3, Estimator::gibbs())).thermal_term == 0.0);
  CHECK(gibbs_error(unstructured({0.5, 2.0}, 0.3, Estimator::gibbs())).thermal_term == 0.0);
  CHECK(gibbs_error(unstructured({2.0, 0.5}, 0.3, Estimator::gibbs())).epsilon ==
        doctest::Approx(ridgeless_error(unstructured({2.0, 0.5}, 0.3)).epsilon).epsilon(1e-14));

  SUBCASE("hidden rescaling multiplies the thermal part only") {
    ModelConfig c;
    c.alphas = {3.0, 2.0, 4.0};
    c.spectra = {two_atoms(), SpectralModel::discrete({{0.5, 0.4}, {2.0, 0.6}}), iso()};
    c.noise_var = 0.1;
    c.estimator = Estimator::gibbs();
    const auto base = gibbs_error(c);
    c.spectra[1] = c.spectra[1].scaled(3.0);
    c.spectra[2] = c.spectra[2].scaled(0.5);
    const auto scaled = gibbs_error(c);
    CHECK(scaled.thermal_term == doctest::Approx(1.5 * base.thermal_term).epsilon(1e-10));
    CHECK(scaled.signal_term == doctest::Approx(base.signal_term).epsilon(1e-10));
    CHECK(scaled.noise_term == doctest::Approx(base.noise_term).epsilon(1e-10));
  }
}

TEST_CASE("large-width expansion") {
  auto c = unstructured({2.0, 100.0}, 0.0);
  const auto lw = large_width_error(c);
  CHECK(lw.epsilon == doctest::Approx(0.505).epsilon(1e-12));
  CHECK(ridgeless_error(c).epsilon == doctest::Approx(0.5 + 0.5 / 99.0).epsilon(1e-12));
  const double gap100 = std::abs(lw.epsilon - ridgeless_error(c).epsilon);
  c.alphas[1] = 200.0;
  const double gap200 = std::abs(large_width_error(c).epsilon - ridgeless_error(c).epsilon);
  CHECK(gap100 / gap200 >= 3.5);
  CHECK(gap100 / gap200 <= 4.5);
  c.alphas[1] = 1e9;
  CHECK(large_width_error(c).epsilon == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("structure penalty") {
  ModelConfig c;
  c.alphas = {3.0, 2.0};
  c.spectra = {two_atoms(), iso()};
  auto [structured, floor] = structure_penalty_check(c);
  CHECK(structured == doctest::Approx(floor).epsilon(1e-10));

  c.spectra[1] = two_atoms();
  const double k1 = solve_kappa(two_atoms(), 2.0);
  CHECK(compute_mu_ratio(two_atoms(), k1) == doctest::Approx(1.154701).epsilon(1e-6));
  std::tie(structured, floor) = structure_penalty_check(c);
  CHECK(structured > floor);

  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> alpha(1.05, 20.0);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ModelConfig r;
    const std::size_t depth = 1 + trial % 3;
    r.alphas = {alpha(gen)};
    r.spectra = {random_discrete(gen, 3)};
    for (std::size_t l = 0; l < depth; ++l) {
      r.alphas.push_back(alpha(gen));
      r.spectra.push_back(random_discrete(gen, 1 + trial % 4));
    }
    r.noise_var = (trial % 2) ? 0.3 : 0.0;
    const auto [s, f] = structure_penalty_check(r);
    if (s < f - 1e-9 * std::abs(f)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("symmetries") {
  ModelConfig c;
  c.alphas = {3.0, 2.0, 5.0};
  c.spectra = {two_atoms(), SpectralModel::discrete({{0.5, 0.4}, {2.0, 0.6}}), iso(3.0)};
  c.noise_var = 0.2;
  const double base = ridgeless_error(c).epsilon;

  auto swapped = c;
  std::swap(swapped.alphas[1], swapped.alphas[2]);
  std::swap(swapped.spectra[1], swapped.spectra[2]);
  CHECK(ridgeless_error(swapped).epsilon == doctest::Approx(base).epsilon(1e-12));

  auto scaled = c;
  scaled.spectra[1] = scaled.spectra[1].scaled(7.0);
  CHECK(ridgeless_error(scaled).epsilon == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("error grows toward the interpolation threshold") {
  const double near = ridgeless_error(unstructured({1.001, 4.0}, 0.5)).epsilon;
  const double mid = ridgeless_error(unstructured({1.1, 4.0}, 0.5)).epsilon;
  const double far = ridgeless_error(unstructured({2.0, 4.0}, 0.5)).epsilon;
  CHECK(near > mid);
  CHECK(mid > far);
  CHECK_THROWS_AS(ridgeless_error(unstructured({1.0, 4.0}, 0.5)), BoundaryError);
}

TEST_CASE("evaluate dispatch") {
  CHECK(evaluate(unstructured({2.0, 4.0}, 0.0)).formula_used == Formula::RidgelessFixedTarget);
  auto c = unstructured({2.0, 4.0}, 0.0);
  c.target = TargetModel::isotropic_average();
  CHECK(evaluate(c).formula_used == Formula::RidgelessAveraged);
  c.estimator = Estimator::ridge(0.1);
  CHECK(evaluate(c).formula_used == Formula::FiniteRidge);
  c.estimator = Estimator::gibbs();
  CHECK(evaluate(c).formula_used == Formula::Gibbs);
}
