#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfm/config_io.hpp"
#include "rfm/theory.hpp"

namespace rfm {

/// One resolved point of a sweep grid.
struct GridPoint {
  std::vector<double> values;  // one per axis
  Problem problem;
};

/// Cartesian product of the axes (first axis slowest), applied to the base
/// problem. Absolute alpha axes are applied before alpha1_over_alpha0.
std::vector<GridPoint> expand_grid(const RunConfig& cfg);

/// Applies axis values to a copy of `base`.
Problem apply_axes(const Problem& base, const std::vector<SweepAxis>& axes, const std::vector<double>& values);

struct EmpiricalSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_seeds = 0;
  std::size_t failed_seeds = 0;
  bool single_seed = false;
  std::size_t p = 0;
  std::vector<std::size_t> sizes;  // n_0..n_L
};

struct RunRecord {
  std::vector<double> axis_values;
  Problem resolved;
  std::string regime;
  std::optional<TheoryResult> theory;
  std::string theory_note;  // reason theory is absent
  std::optional<double> power_law_epsilon;
  std::optional<double> large_width_epsilon;
  std::optional<EmpiricalSummary> empirical;
  std::optional<double> wall_seconds;
  std::vector<std::string> warnings;
};

struct SweepOptions {
  bool simulate = false;
  std::size_t threads = 1;
  bool timing = false;
};

/// Evaluates every grid point. Solver failures are rethrown as
/// ConvergenceError naming the grid point; per-seed simulation failures are
/// retried without the failing seeds and flagged on the record.
std::vector<RunRecord> run_sweep(const RunConfig& cfg, const SweepOptions& opts);

/// CSV columns: one per axis, then regime, epsilon, signal, noise, thermal,
/// zeta, kappa_0..kappa_L, mu_0..mu_L, emp_mean, emp_stderr, n_seeds,
/// formula, epsilon_power_law, epsilon_large_width, failed_seeds
/// [, wall_seconds]. Missing values are empty fields; numbers use 17
/// significant digits.
std::string to_csv(const RunConfig& cfg, const std::vector<RunRecord>& records, bool timing);
nlohmann::ordered_json to_json(const RunConfig& cfg, const std::vector<RunRecord>& records, bool timing);

/// Plot manifest describing the emitted table.
nlohmann::ordered_json plot_manifest(const RunConfig& cfg, const std::string& data_path, const std::string& format);

std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::optional<std::size_t> column(const std::string& name) const;
};
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

/// Axis grids of the two tables differ.
class GridMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ComparedPoint {
  std::vector<std::string> axis_values;
  double reference = 0.0;
  double observed = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  bool pass = true;
  bool skipped = false;
};

struct CompareReport {
  std::vector<std::string> axis_names;
  std::vector<ComparedPoint> points;
  double max_abs_z = 0.0;
  bool pass = true;
};

/// Reference is the `epsilon` column of `theory`; the observation is
/// `emp_mean` of `observed` when present, else its `epsilon`. A point passes
/// when |z| <= threshold or |observed - reference| <= rel_tol * |reference|.
CompareReport compare_tables(const CsvTable& theory, const CsvTable& observed, double threshold, double rel_tol);
std::string format_report(const CompareReport& report, double threshold);

}  // namespace rfm
