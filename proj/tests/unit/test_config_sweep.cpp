#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "rfm/config_io.hpp"
#include "rfm/sweep.hpp"

using namespace rfm;

namespace {

const char* kFull = R"({
  "schema_version": 1,
  "model": {
    "alphas": [2.0, 8.0, 3.0],
    "spectra": [
      {"kind": "power_law", "scale": 1.0, "exponent": 1.0, "resolution": 5000},
      {"kind": "discrete", "atoms": [{"value": 1.0, "weight": 0.5}, {"value": 3.0, "weight": 0.5}]},
      {"kind": "isotropic", "scale": 2.0}
    ],
    "target": {"kind": "isotropic_average"},
    "eta": 0.5,
    "estimator": {"kind": "ridge", "lambda": 0.01}
  },
  "sweep": {
    "axes": [{"name": "alpha0_inverse", "grid": [0.2, 0.4]}, {"name": "omega0", "grid": [0.5, 1.0, 2.0]}],
    "outputs": ["theory", "power_law"]
  },
  "simulation": {"n0": 100, "seeds": 5, "base_seed": 10, "threads": 2, "rank_tol": 1e-12},
  "solver": {"rel_tol": 1e-11, "abs_tol": 1e-13, "max_iters": 150, "bracket_growth": 3.0},
  "regime_tol": 1e-7
})";

const char* kRaw = R"({
  "schema_version": 1,
  "raw": {
    "gammas": [{"diagonal": [4.0, 1.0, 2.0]}, {"identity": 2}],
    "sigmas": [{"matrix": [[1.0, 0.2, 0.0], [0.2, 1.0, 0.0], [0.0, 0.0, 0.5]]}, {"diagonal": [1.0, 2.0]}],
    "teacher": [1.0, -1.0, 0.5],
    "alphas": [2.0, 4.0],
    "noise_var": 0.1,
    "estimator": {"kind": "ridgeless"}
  },
  "sweep": {"axes": [{"name": "eta", "grid": [0.0, 0.5]}]}
})";

std::string unstructured_sweep(const std::string& axes, const std::string& extra = "") {
  return R"({"schema_version": 1,
    "model": {"alphas": [2.0, 8.0],
              "spectra": [{"kind": "isotropic", "scale": 1.0}, {"kind": "isotropic", "scale": 1.0}],
              "target": {"kind": "weighted_density", "atoms": [{"value": 1.0, "mass": 1.0}]},
              "eta": 0.0},
    "sweep": {"axes": )" +
         axes + "}" + extra + "}";
}

}  // namespace

TEST_CASE("config round trip") {
  for (const char* text : {kFull, kRaw}) {
    const RunConfig cfg = parse_run_config(text);
    const RunConfig again = parse_run_config(dump_run_config(cfg));
    CHECK(again == cfg);
    CHECK(dump_run_config(again) == dump_run_config(cfg));
  }
  const RunConfig cfg = parse_run_config(kFull);
  CHECK(cfg.simulation.seeds == std::vector<std::uint64_t>{10, 11, 12, 13, 14});
  CHECK(cfg.solver.max_iters == 150);
  const auto& m = std::get<ModelConfig>(cfg.problem);
  CHECK(m.noise_var == doctest::Approx(0.25));
  CHECK(m.spectra[0].resolution() == 5000);
}

TEST_CASE("config diagnostics") {
  auto where = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const ConfigError& e) {
      return e.where();
    }
    return std::string("no error");
  };
  CHECK(where("{\n  \"schema_version\": 1,\n  \"model\": [1, }") == "line 3, column 16");
  CHECK(where(R"({"schema_version": 2, "model": {}})") == "schema_version");
  CHECK(where(R"({"schema_version": 1})") == "config");
  std::string bad_exponent = kFull;
  bad_exponent.replace(bad_exponent.find("\"exponent\": 1.0"), 15, "\"exponent\": -1.0");
  CHECK(where(bad_exponent).find("model.spectra[0]") == 0);
  std::string unknown = kFull;
  unknown.replace(unknown.find("\"eta\""), 5, "\"etta\"");
  CHECK(where(unknown) == "model.etta");
  CHECK(where(unstructured_sweep(R"([{"name": "alpha0_inverse", "grid": [0.1, 0.3, 0.2]}])")) == "sweep.axes[0].grid");
  CHECK(where(unstructured_sweep(R"([{"name": "depth", "grid": [1]}])")) == "sweep.axes[0].name");
  CHECK(where(unstructured_sweep(R"([{"name": "eta", "grid": []}])")) == "sweep.axes[0].grid");
  std::string raw_bad = kRaw;
  raw_bad.replace(raw_bad.find("\"eta\""), 5, "\"alpha0\"");
  CHECK(where(raw_bad) == "sweep.axes[0].name");
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("grid expansion") {
  const RunConfig cfg = parse_run_config(kFull);
  const auto points = expand_grid(cfg);
  REQUIRE(points.size() == 6);
  CHECK(points[0].values == std::vector<double>{0.2, 0.5});
  CHECK(points[1].values == std::vector<double>{0.2, 1.0});
  CHECK(points[3].values == std::vector<double>{0.4, 0.5});
  const auto& m = std::get<ModelConfig>(points[4].problem);
  CHECK(m.alphas[0] == doctest::Approx(2.5));
  CHECK(m.spectra[0].exponent() == 1.0);
  CHECK(m.spectra[0].resolution() == 5000);

  auto ratio = parse_run_config(unstructured_sweep(
      R"([{"name": "alpha1_over_alpha0", "grid": [2.0, 4.0]}, {"name": "alpha0_inverse", "grid": [0.25, 0.5]}])"));
  const auto rp = expand_grid(ratio);
  const auto& last = std::get<ModelConfig>(rp[3].problem);
  CHECK(last.alphas[0] == doctest::Approx(2.0));
  CHECK(last.alphas[1] == doctest::Approx(8.0));

  auto omega_on_iso = parse_run_config(unstructured_sweep(R"([{"name": "omega1", "grid": [1.0]}])"));
  CHECK_THROWS_AS(expand_grid(omega_on_iso), ConfigError);
}

TEST_CASE("theory sweep matches the closed form and flags boundaries") {
  auto cfg = parse_run_config(unstructured_sweep(
      R"([{"name": "alpha0_inverse", "grid": [0.1, 0.3, 0.5, 0.7, 0.9]}, {"name": "alpha1_over_alpha0", "grid": [4.0]}])"));
  const auto records = run_sweep(cfg, {false, 3, false});
  REQUIRE(records.size() == 5);
  for (const auto& r : records) {
    const double a0 = 1.0 / r.axis_values[0];
    REQUIRE(r.theory);
    CHECK(r.theory->epsilon == doctest::Approx(oracle::unstructured_ridgeless({a0, 4 * a0}, 0.0)).epsilon(1e-10));
  }

  auto boundary = parse_run_config(unstructured_sweep(R"([{"name": "alpha0_inverse", "grid": [0.5, 1.0]}])"));
  const auto br = run_sweep(boundary, {});
  CHECK(br[1].regime == "Boundary");
  CHECK_FALSE(br[1].theory);
  const std::string csv = to_csv(boundary, br, false);
  std::istringstream in(csv);
  const auto table = parse_csv(in);
  CHECK(table.rows[1][*table.column("epsilon")].empty());
  CHECK(table.rows[1][*table.column("regime")] == "Boundary");
  CHECK(table.rows[0][*table.column("emp_mean")].empty());
}

TEST_CASE("csv layout and formatting") {
  auto cfg = parse_run_config(unstructured_sweep(R"([{"name": "eta", "grid": [0.0, 0.5]}])"));
  const auto records = run_sweep(cfg, {});
  std::istringstream in(to_csv(cfg, records, false));
  const auto t = parse_csv(in);
  const std::vector<std::string> expected{"eta",      "regime",  "epsilon",  "signal", "noise",
                                          "thermal",  "zeta",    "kappa_0",  "kappa_1", "mu_0",
                                          "mu_1",     "emp_mean", "emp_stderr", "n_seeds", "formula",
                                          "epsilon_power_law", "epsilon_large_width", "failed_seeds"};
  CHECK(t.header == expected);
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_number(2.0 / 3.0)) == 2.0 / 3.0);
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");

  const auto json = to_json(cfg, records, false);
  CHECK(json["schema_version"] == 1);
  CHECK(json["records"].size() == 2);
  CHECK(json["records"][0]["empirical"].is_null());
  CHECK(json["records"][1]["config"]["noise_var"] == doctest::Approx(0.25));

  const auto manifest = plot_manifest(cfg, "out.csv", "csv");
  CHECK(manifest["x"] == "eta");
  CHECK(manifest["data"] == "out.csv");
}

TEST_CASE("compare") {
  auto cfg = parse_run_config(unstructured_sweep(R"([{"name": "alpha0_inverse", "grid": [0.2, 0.4, 0.6]}])"));
  const std::string csv = to_csv(cfg, run_sweep(cfg, {}), false);
  std::istringstream a(csv), b(csv);
  const auto theory = parse_csv(a), same = parse_csv(b);

  const auto self = compare_tables(theory, same, 3.0, 0.0);
  CHECK(self.pass);
  for (const auto& p : self.points) CHECK(p.z == 0.0);

  auto corrupted = same;
  const auto eps = *corrupted.column("epsilon");
  corrupted.rows[1][eps] = "0.123";
  const auto bad = compare_tables(theory, corrupted, 3.0, 0.0);
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(bad.points[1].pass);
  CHECK(bad.points[0].pass);
  CHECK(format_report(bad, 3.0).find("failing rows: 2") != std::string::npos);
  CHECK(compare_tables(theory, corrupted, 3.0, 10.0).pass);

  SUBCASE("z-scores use the observed standard error") {
    auto sim = same;
    const auto mean = *sim.column("emp_mean"), se = *sim.column("emp_stderr");
    const double ref = std::stod(theory.rows[0][eps]);
    sim.rows[0][mean] = format_number(ref + 0.02);
    sim.rows[0][se] = "0.01";
    const auto r = compare_tables(theory, sim, 3.0, 0.0);
    CHECK(r.points[0].z == doctest::Approx(2.0));
    CHECK(r.pass);
    CHECK_FALSE(compare_tables(theory, sim, 1.5, 0.0).pass);
  }
  SUBCASE("grid mismatch") {
    auto shifted = same;
    shifted.rows[2][0] = "0.65";
    CHECK_THROWS_AS(compare_tables(theory, shifted, 3.0, 0.0), GridMismatchError);
    auto shorter = same;
    shorter.rows.pop_back();
    CHECK_THROWS_AS(compare_tables(theory, shorter, 3.0, 0.0), GridMismatchError);
  }
}

TEST_CASE("simulation sweep") {
  auto cfg = parse_run_config(unstructured_sweep(R"([{"name": "alpha0_inverse", "grid": [0.5]}])",
                                                 R"(, "simulation": {"n0": 40, "seeds": 4})"));
  const auto records = run_sweep(cfg, {true, 2, false});
  REQUIRE(records[0].empirical);
  CHECK(records[0].empirical->n_seeds == 4);
  CHECK(records[0].empirical->p == 20);
  CHECK(records[0].empirical->sizes == std::vector<std::size_t>{40, 160});
  CHECK(to_csv(cfg, records, false) == to_csv(cfg, run_sweep(cfg, {true, 1, false}), false));

  cfg.simulation.seeds = {3};
  const auto single = run_sweep(cfg, {true, 1, false});
  CHECK(single[0].empirical->single_seed);
  std::istringstream in(to_csv(cfg, single, false));
  const auto t = parse_csv(in);
  CHECK(t.rows[0][*t.column("emp_stderr")].empty());

  cfg.simulation.n0 = 0;
  CHECK_THROWS_AS(run_sweep(cfg, {true, 1, false}), ConfigError);
}
