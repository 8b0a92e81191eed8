// rfm-curves: learning curves for deep linear random-feature models.
//
// Exit codes: 0 ok, 1 compare failed, 2 configuration or usage error,
// 3 solver did not converge, 4 seeds failed during simulation, 5 grid mismatch.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "rfm/config_io.hpp"
#include "rfm/errors.hpp"
#include "rfm/montecarlo.hpp"
#include "rfm/sweep.hpp"

namespace {

enum Exit { kOk = 0, kCompareFail = 1, kConfig = 2, kSolver = 3, kSeeds = 4, kGrid = 5 };

struct RunFlags {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::string manifest;
  std::optional<std::size_t> threads;
  std::optional<double> tol;
  bool timing = false;
  // simulate only
  std::string seeds;
  std::optional<std::size_t> n0;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  if (text.find(',') == std::string::npos) {
    std::size_t used = 0;
    const unsigned long long count = std::stoull(text, &used);
    if (used != text.size() || count == 0) throw rfm::ConfigError("--seeds", "expected a positive count or a list");
    return rfm::consecutive_seeds(1, count);
  }
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    seeds.push_back(std::stoull(item, &used));
    if (used != item.size()) throw rfm::ConfigError("--seeds", "bad seed '" + item + "'");
  }
  return seeds;
}

std::size_t resolve_threads(const RunFlags& f, std::size_t fallback) {
  if (f.threads) return *f.threads;
  if (const char* env = std::getenv("RFM_CURVES_THREADS"); env && *env) {
    try {
      return std::stoul(env);
    } catch (const std::exception&) {
      throw rfm::ConfigError("RFM_CURVES_THREADS", std::string("not a thread count: ") + env);
    }
  }
  return fallback;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rfm::ConfigError("--out", "cannot write " + path);
  out << text;
}

int run_curves(const RunFlags& f, bool simulate) {
  rfm::RunConfig cfg = rfm::load_run_config(f.config);
  if (f.tol) cfg.solver.rel_tol = *f.tol;
  if (simulate) {
    if (!f.seeds.empty()) {
      try {
        cfg.simulation.seeds = parse_seeds(f.seeds);
      } catch (const std::logic_error&) {
        throw rfm::ConfigError("--seeds", "expected a positive count or a comma-separated list");
      }
    }
    if (f.n0) cfg.simulation.n0 = *f.n0;
  }
  cfg.validate();

  rfm::SweepOptions opts;
  opts.simulate = simulate;
  opts.threads = resolve_threads(f, cfg.simulation.threads);
  opts.timing = f.timing;
  const auto records = rfm::run_sweep(cfg, opts);

  bool seeds_failed = false;
  for (const auto& r : records) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    if (r.empirical && r.empirical->single_seed) {
      std::cerr << "note: single seed, no standard error available\n";
    }
    seeds_failed = seeds_failed || (r.empirical && r.empirical->failed_seeds > 0);
  }
  const std::string text =
      f.format == "json" ? rfm::to_json(cfg, records, f.timing).dump(2) + "\n" : rfm::to_csv(cfg, records, f.timing);
  write_output(f.out, text);
  if (!f.manifest.empty()) {
    write_output(f.manifest, rfm::plot_manifest(cfg, f.out.empty() ? "-" : f.out, f.format).dump(2) + "\n");
  }
  return seeds_failed ? kSeeds : kOk;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output file (default stdout)");
  cmd->add_option("--format", f.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", f.threads, "worker threads, 0 for all cores (env RFM_CURVES_THREADS)");
  cmd->add_option("--tol", f.tol, "relative tolerance of the root finders")->check(CLI::PositiveNumber);
  cmd->add_option("--manifest", f.manifest, "write a plot manifest JSON here");
  cmd->add_flag("--timing", f.timing, "add wall-clock seconds per grid point");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning curves for deep linear random-feature models"};
  app.require_subcommand(1);

  RunFlags theory_flags;
  auto* theory = app.add_subcommand("theory", "evaluate the asymptotic learning curve over the sweep grid");
  add_run_flags(theory, theory_flags);

  RunFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "finite-size Monte Carlo over the sweep grid");
  add_run_flags(simulate, sim_flags);
  simulate->add_option("--seeds", sim_flags.seeds, "seed count N (seeds 1..N) or comma-separated list");
  simulate->add_option("--n0", sim_flags.n0, "input dimension; other widths follow from the alphas")
      ->check(CLI::PositiveNumber);

  std::string theory_csv, observed_csv, report_out;
  double threshold = 3.0, rel_tol = 0.0;
  auto* compare = app.add_subcommand("compare", "z-scores of a simulation table against a theory table");
  compare->add_option("theory_csv", theory_csv, "reference table")->required()->check(CLI::ExistingFile);
  compare->add_option("sim_csv", observed_csv, "observed table")->required()->check(CLI::ExistingFile);
  compare->add_option("--threshold", threshold, "largest accepted |z|")->check(CLI::NonNegativeNumber);
  compare->add_option("--rel-tol", rel_tol, "also accept points within this relative difference")
      ->check(CLI::NonNegativeNumber);
  compare->add_option("--out", report_out, "report file (default stdout)");

  std::string validate_path;
  bool print_normalized = false;
  auto* validate = app.add_subcommand("validate-config", "parse and validate a configuration");
  validate->add_option("--config", validate_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  validate->add_flag("--print", print_normalized, "print the normalized configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*theory) return run_curves(theory_flags, false);
    if (*simulate) return run_curves(sim_flags, true);
    if (*compare) {
      const auto report = rfm::compare_tables(rfm::read_csv(theory_csv), rfm::read_csv(observed_csv), threshold, rel_tol);
      write_output(report_out, rfm::format_report(report, threshold));
      return report.pass ? kOk : kCompareFail;
    }
    if (*validate) {
      const auto cfg = rfm::load_run_config(validate_path);
      if (print_normalized) {
        std::cout << rfm::dump_run_config(cfg) << "\n";
      } else {
        std::cout << "ok: " << validate_path << "\n";
      }
      return kOk;
    }
  } catch (const rfm::GridMismatchError& e) {
    std::cerr << "error: grid mismatch: " << e.what() << "\n";
    return kGrid;
  } catch (const rfm::ConvergenceError& e) {
    std::cerr << "error: solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const rfm::NumericalError& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return kSolver;
  } catch (const rfm::SeedFailureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSeeds;
  } catch (const rfm::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
