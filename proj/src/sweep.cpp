#include "rfm/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <thread>

#include "rfm/errors.hpp"
#include "rfm/montecarlo.hpp"

namespace rfm {
namespace {

using nlohmann::ordered_json;

std::size_t depth_of(const Problem& p) {
  return std::visit([](const auto& m) { return m.depth(); }, p);
}

std::string point_label(const std::vector<SweepAxis>& axes, const std::vector<double>& values) {
  if (axes.empty()) return "base configuration";
  std::string s = "grid point (";
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (i) s += ", ";
    s += axes[i].name + "=" + format_number(values[i]);
  }
  return s + ")";
}

void apply_to_model(ModelConfig& m, const std::string& name, double v) {
  static const std::regex indexed{R"((alpha|omega)(\d+))"};
  std::smatch match;
  if (name == "alpha0_inverse") {
    m.alphas.at(0) = 1.0 / v;
  } else if (name == "alpha_hidden") {
    for (std::size_t l = 1; l < m.alphas.size(); ++l) m.alphas[l] = v;
  } else if (name == "lambda") {
    m.estimator = Estimator::ridge(v);
  } else if (name == "eta") {
    m.noise_var = v * v;
  } else if (name == "noise_var") {
    m.noise_var = v;
  } else if (std::regex_match(name, match, indexed)) {
    const std::size_t k = std::stoul(match[2].str());
    if (k >= m.alphas.size()) throw ConfigError("sweep.axes", "axis " + name + " refers to a missing layer");
    if (match[1].str() == "alpha") {
      m.alphas[k] = v;
    } else {
      const SpectralModel& s = m.spectra[k];
      if (s.kind() != SpectrumKind::PowerLaw) throw ConfigError("sweep.axes", "axis " + name + " needs a power-law spectrum");
      m.spectra[k] = SpectralModel::power_law(s.scale(), v, s.resolution());
    }
  } else if (name != "alpha1_over_alpha0") {
    throw ConfigError("sweep.axes", "unknown axis '" + name + "'");
  }
}

EmpiricalSummary simulate_point(const RunConfig& cfg, const Problem& problem, std::size_t threads) {
  ExperimentConfig exp;
  exp.model = problem;
  exp.threads = threads;
  exp.rank_tol = cfg.simulation.rank_tol;
  exp.attach_theory = false;
  if (const auto* m = std::get_if<ModelConfig>(&problem)) {
    if (cfg.simulation.n0 == 0) throw ConfigError("simulation.n0", "simulation needs n0 (config or --n0)");
    const Sizes sizes = sizes_from_alphas(cfg.simulation.n0, m->alphas);
    exp.n0 = sizes.n0;
    exp.hidden = sizes.hidden;
    exp.p = sizes.p;
    exp.estimator = m->estimator;
  } else {
    const auto& raw = std::get<RawConfig>(problem);
    exp.n0 = static_cast<std::size_t>(raw.sigmas.front().dim());
    for (std::size_t l = 1; l < raw.sigmas.size(); ++l) exp.hidden.push_back(static_cast<std::size_t>(raw.sigmas[l].dim()));
    exp.p = static_cast<std::size_t>(std::llround(static_cast<double>(exp.n0) / raw.alphas.front()));
    exp.estimator = raw.estimator;
  }
  if (cfg.simulation.seeds.empty()) throw ConfigError("simulation.seeds", "simulation needs at least one seed");
  exp.seeds = cfg.simulation.seeds;

  EmpiricalSummary out;
  out.p = exp.p;
  out.sizes.push_back(exp.n0);
  out.sizes.insert(out.sizes.end(), exp.hidden.begin(), exp.hidden.end());
  ExperimentResult res;
  try {
    res = run_experiment(exp);
  } catch (const SeedFailureError& e) {
    // Retry once without the failing seeds; the record keeps the count.
    std::vector<std::uint64_t> keep;
    for (std::uint64_t s : exp.seeds) {
      bool failed = false;
      for (const auto& f : e.failures()) failed = failed || f.first == s;
      if (!failed) keep.push_back(s);
    }
    out.failed_seeds = exp.seeds.size() - keep.size();
    if (keep.empty()) return out;
    exp.seeds = keep;
    res = run_experiment(exp);
  }
  out.mean = res.mean;
  out.std_error = res.std_error;
  out.n_seeds = res.per_seed_errors.size();
  out.single_seed = res.single_seed;
  return out;
}

RunRecord evaluate_point(const RunConfig& cfg, const GridPoint& point, const SweepOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.axis_values = point.values;
  rec.resolved = point.problem;
  const std::string label = point_label(cfg.sweep.axes, point.values);
  TheoryOptions topts{cfg.solver, cfg.regime_tol};

  ModelConfig model;
  if (const auto* m = std::get_if<ModelConfig>(&point.problem)) {
    model = *m;
  } else {
    model = transform(std::get<RawConfig>(point.problem));
  }
  rec.regime = to_string(classify(model.alphas, cfg.regime_tol).tag);

  if (cfg.sweep.wants("theory")) {
    try {
      rec.theory = evaluate(model, topts);
    } catch (const BoundaryError& e) {
      rec.theory_note = e.what();
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(label + ": " + e.what());
    } catch (const NumericalError& e) {
      throw ConvergenceError(label + ": " + e.what());
    } catch (const DomainError& e) {
      rec.theory_note = e.what();
    }
  }
  if (cfg.sweep.wants("power_law")) {
    try {
      rec.power_law_epsilon = power_law_error(model, topts).epsilon;
    } catch (const InputError& e) {
      rec.warnings.push_back(label + ": power-law approximation unavailable: " + e.what());
    } catch (const DomainError&) {
    }
    if (rec.power_law_epsilon && rec.theory && rec.theory->epsilon > 0.0) {
      const double rel = std::abs(*rec.power_law_epsilon - rec.theory->epsilon) / rec.theory->epsilon;
      if (rel > 0.10) {
        std::ostringstream msg;
        msg << label << ": power-law approximation differs from the discretized reference by "
            << std::round(rel * 1000.0) / 10.0 << "%";
        rec.warnings.push_back(msg.str());
      }
    }
  }
  if (cfg.sweep.wants("large_width")) {
    try {
      rec.large_width_epsilon = large_width_error(model, topts).epsilon;
    } catch (const InputError& e) {
      rec.warnings.push_back(label + ": large-width expansion unavailable: " + e.what());
    } catch (const DomainError&) {
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(label + ": " + e.what());
    }
  }
  if (opts.simulate) {
    rec.empirical = simulate_point(cfg, point.problem, opts.threads);
    if (rec.empirical->failed_seeds > 0) {
      rec.warnings.push_back(label + ": " + std::to_string(rec.empirical->failed_seeds) + " seed(s) failed and were dropped");
    }
  }
  if (opts.timing) {
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

std::string field(const std::optional<double>& x) { return x ? format_number(*x) : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_field(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<std::string> axis_columns(const CsvTable& t) {
  std::vector<std::string> names;
  for (const auto& h : t.header) {
    if (h == "regime") return names;
    names.push_back(h);
  }
  throw GridMismatchError("table has no regime column");
}

}  // namespace

Problem apply_axes(const Problem& base, const std::vector<SweepAxis>& axes, const std::vector<double>& values) {
  Problem out = base;
  if (auto* m = std::get_if<ModelConfig>(&out)) {
    for (std::size_t i = 0; i < axes.size(); ++i) apply_to_model(*m, axes[i].name, values[i]);
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i].name != "alpha1_over_alpha0") continue;
      if (m->alphas.size() < 2) throw ConfigError("sweep.axes", "alpha1_over_alpha0 needs a hidden layer");
      for (std::size_t l = 1; l < m->alphas.size(); ++l) m->alphas[l] = values[i] * m->alphas[0];
    }
    m->validate();
  } else {
    auto& raw = std::get<RawConfig>(out);
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const double v = values[i];
      if (axes[i].name == "eta") {
        raw.noise_var = v * v;
      } else if (axes[i].name == "noise_var") {
        raw.noise_var = v;
      } else if (axes[i].name == "lambda") {
        raw.estimator = Estimator::ridge(v);
      } else {
        throw ConfigError("sweep.axes", "raw configurations cannot sweep " + axes[i].name);
      }
    }
    raw.validate();
  }
  return out;
}

std::vector<GridPoint> expand_grid(const RunConfig& cfg) {
  const auto& axes = cfg.sweep.axes;
  std::vector<GridPoint> points;
  if (axes.empty()) {
    points.push_back({{}, cfg.problem});
    return points;
  }
  std::vector<std::vector<double>> combos;
  for (double a : axes[0].grid) {
    if (axes.size() == 1) {
      combos.push_back({a});
    } else {
      for (double b : axes[1].grid) combos.push_back({a, b});
    }
  }
  for (auto& values : combos) {
    try {
      points.push_back({values, apply_axes(cfg.problem, axes, values)});
    } catch (const ConfigError&) {
      throw;
    } catch (const InputError& e) {
      throw ConfigError("sweep", point_label(axes, values) + ": " + e.what());
    }
  }
  return points;
}

std::vector<RunRecord> run_sweep(const RunConfig& cfg, const SweepOptions& opts) {
  const std::vector<GridPoint> points = expand_grid(cfg);
  std::vector<RunRecord> records(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<std::size_t> next{0};
  // Simulations parallelize over seeds; theory-only sweeps over grid points.
  const SweepOptions inner{opts.simulate, opts.simulate ? opts.threads : 1, opts.timing};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        records[i] = evaluate_point(cfg, points[i], inner);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = opts.simulate ? 1 : std::min(std::max<std::size_t>(opts.threads, 1), points.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string to_csv(const RunConfig& cfg, const std::vector<RunRecord>& records, bool timing) {
  const std::size_t layers = depth_of(cfg.problem) + 1;
  std::ostringstream out;
  std::vector<std::string> header;
  for (const auto& a : cfg.sweep.axes) header.push_back(a.name);
  for (const char* h : {"regime", "epsilon", "signal", "noise", "thermal", "zeta"}) header.push_back(h);
  for (std::size_t l = 0; l < layers; ++l) header.push_back("kappa_" + std::to_string(l));
  for (std::size_t l = 0; l < layers; ++l) header.push_back("mu_" + std::to_string(l));
  for (const char* h : {"emp_mean", "emp_stderr", "n_seeds", "formula", "epsilon_power_law", "epsilon_large_width",
                        "failed_seeds"}) {
    header.push_back(h);
  }
  if (timing) header.push_back("wall_seconds");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";

  for (const auto& r : records) {
    std::vector<std::string> row;
    for (double v : r.axis_values) row.push_back(format_number(v));
    row.push_back(r.regime);
    if (r.theory) {
      const auto& t = *r.theory;
      for (double v : {t.epsilon, t.signal_term, t.noise_term, t.thermal_term, t.saddle.zeta}) row.push_back(format_number(v));
      for (std::size_t l = 0; l < layers; ++l) row.push_back(l < t.saddle.kappas.size() ? format_number(t.saddle.kappas[l]) : "");
      for (std::size_t l = 0; l < layers; ++l) row.push_back(l < t.saddle.mus.size() ? format_number(t.saddle.mus[l]) : "");
    } else {
      row.insert(row.end(), 5 + 2 * layers, "");
    }
    if (r.empirical && r.empirical->n_seeds > 0) {
      row.push_back(format_number(r.empirical->mean));
      // A single seed has no spread estimate; leave the field empty.
      row.push_back(r.empirical->single_seed ? "" : format_number(r.empirical->std_error));
      row.push_back(std::to_string(r.empirical->n_seeds));
    } else {
      row.insert(row.end(), 3, "");
    }
    row.push_back(r.theory ? to_string(r.theory->formula_used) : "");
    row.push_back(field(r.power_law_epsilon));
    row.push_back(field(r.large_width_epsilon));
    row.push_back(r.empirical ? std::to_string(r.empirical->failed_seeds) : "");
    if (timing) row.push_back(field(r.wall_seconds));
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  return out.str();
}

ordered_json to_json(const RunConfig& cfg, const std::vector<RunRecord>& records, bool timing) {
  auto num = [](const std::optional<double>& x) -> ordered_json {
    if (!x || !std::isfinite(*x)) return nullptr;
    return *x;
  };
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["axes"] = ordered_json::array();
  for (const auto& a : cfg.sweep.axes) doc["axes"].push_back(a.name);
  doc["records"] = ordered_json::array();
  for (const auto& r : records) {
    ordered_json j;
    ordered_json axes = ordered_json::object();
    for (std::size_t i = 0; i < r.axis_values.size(); ++i) axes[cfg.sweep.axes[i].name] = r.axis_values[i];
    j["axes"] = axes;
    j["regime"] = r.regime;
    if (r.theory) {
      const auto& t = *r.theory;
      j["epsilon"] = num(t.epsilon);
      j["signal"] = num(t.signal_term);
      j["noise"] = num(t.noise_term);
      j["thermal"] = num(t.thermal_term);
      j["zeta"] = num(t.saddle.zeta);
      j["kappas"] = ordered_json::array();
      for (double k : t.saddle.kappas) j["kappas"].push_back(num(k));
      j["mus"] = ordered_json::array();
      for (double m : t.saddle.mus) j["mus"].push_back(num(m));
      j["formula"] = to_string(t.formula_used);
      j["notes"] = t.notes;
    } else {
      for (const char* k : {"epsilon", "signal", "noise", "thermal", "zeta", "kappas", "mus", "formula"}) j[k] = nullptr;
      j["notes"] = r.theory_note.empty() ? ordered_json::array() : ordered_json::array({r.theory_note});
    }
    j["epsilon_power_law"] = num(r.power_law_epsilon);
    j["epsilon_large_width"] = num(r.large_width_epsilon);
    if (r.empirical) {
      const auto& e = *r.empirical;
      j["empirical"] = {{"mean", e.n_seeds ? num(e.mean) : ordered_json(nullptr)},
                        {"std_error", e.n_seeds && !e.single_seed ? num(e.std_error) : ordered_json(nullptr)},
                        {"n_seeds", e.n_seeds},
                        {"failed_seeds", e.failed_seeds},
                        {"single_seed", e.single_seed},
                        {"p", e.p},
                        {"sizes", e.sizes}};
    } else {
      j["empirical"] = nullptr;
    }
    j["warnings"] = r.warnings;
    if (timing) j["wall_seconds"] = num(r.wall_seconds);
    if (const auto* m = std::get_if<ModelConfig>(&r.resolved)) {
      j["config"] = to_json(*m);
    } else {
      j["config"] = to_json(std::get<RawConfig>(r.resolved));
    }
    doc["records"].push_back(j);
  }
  return doc;
}

ordered_json plot_manifest(const RunConfig& cfg, const std::string& data_path, const std::string& format) {
  ordered_json m;
  m["schema_version"] = kSchemaVersion;
  m["data"] = data_path;
  m["format"] = format;
  m["x"] = cfg.sweep.axes.empty() ? ordered_json(nullptr) : ordered_json(cfg.sweep.axes[0].name);
  m["group_by"] = cfg.sweep.axes.size() > 1 ? ordered_json(cfg.sweep.axes[1].name) : ordered_json(nullptr);
  m["series"] = ordered_json::array();
  m["series"].push_back({{"name", "theory"}, {"y", "epsilon"}, {"style", "line"}});
  if (cfg.sweep.wants("power_law")) {
    m["series"].push_back({{"name", "power_law_approximation"}, {"y", "epsilon_power_law"}, {"style", "dashed"}});
  }
  if (cfg.sweep.wants("large_width")) {
    m["series"].push_back({{"name", "large_width_expansion"}, {"y", "epsilon_large_width"}, {"style", "dashed"}});
  }
  m["series"].push_back({{"name", "simulation"}, {"y", "emp_mean"}, {"yerr", "emp_stderr"}, {"style", "points"}});
  return m;
}

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) {
        throw InputError("CSV row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                         " fields, header has " + std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw InputError("CSV input is empty");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return parse_csv(in);
}

CompareReport compare_tables(const CsvTable& theory, const CsvTable& observed, double threshold, double rel_tol) {
  CompareReport rep;
  rep.axis_names = axis_columns(theory);
  if (axis_columns(observed) != rep.axis_names) throw GridMismatchError("axis columns differ between the two tables");
  if (theory.rows.size() != observed.rows.size()) {
    throw GridMismatchError("grid sizes differ: " + std::to_string(theory.rows.size()) + " vs " +
                            std::to_string(observed.rows.size()) + " rows");
  }
  const auto ref_col = theory.column("epsilon");
  if (!ref_col) throw GridMismatchError("reference table has no epsilon column");
  const auto mean_col = observed.column("emp_mean");
  const auto eps_col = observed.column("epsilon");
  const auto se_col = observed.column("emp_stderr");

  for (std::size_t r = 0; r < theory.rows.size(); ++r) {
    ComparedPoint pt;
    for (std::size_t a = 0; a < rep.axis_names.size(); ++a) {
      const auto x = parse_field(theory.rows[r][a]);
      const auto y = parse_field(observed.rows[r][a]);
      if (!x || !y || std::abs(*x - *y) > 1e-12 * std::max(1.0, std::abs(*x))) {
        throw GridMismatchError("row " + std::to_string(r + 1) + ": axis " + rep.axis_names[a] + " is " +
                                theory.rows[r][a] + " in one table and " + observed.rows[r][a] + " in the other");
      }
      pt.axis_values.push_back(theory.rows[r][a]);
    }
    const auto ref = parse_field(theory.rows[r][*ref_col]);
    std::optional<double> obs;
    if (mean_col) obs = parse_field(observed.rows[r][*mean_col]);
    if (!obs && eps_col) obs = parse_field(observed.rows[r][*eps_col]);
    if (!ref || !obs) {
      pt.skipped = true;
      rep.points.push_back(pt);
      continue;
    }
    pt.reference = *ref;
    pt.observed = *obs;
    if (se_col) pt.std_error = parse_field(observed.rows[r][*se_col]).value_or(0.0);
    const double diff = pt.observed - pt.reference;
    if (diff == 0.0) {
      pt.z = 0.0;
    } else if (pt.std_error > 0.0) {
      pt.z = diff / pt.std_error;
    } else {
      pt.z = std::copysign(std::numeric_limits<double>::infinity(), diff);
    }
    pt.pass = std::abs(pt.z) <= threshold || std::abs(diff) <= rel_tol * std::abs(pt.reference);
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(pt.z));
    rep.pass = rep.pass && pt.pass;
    rep.points.push_back(pt);
  }
  return rep;
}

std::string format_report(const CompareReport& rep, double threshold) {
  std::ostringstream out;
  for (const auto& a : rep.axis_names) out << a << "\t";
  out << "reference\tobserved\tstd_error\tz\tstatus\n";
  std::vector<std::size_t> failed;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& p = rep.points[i];
    for (const auto& v : p.axis_values) out << v << "\t";
    if (p.skipped) {
      out << "\t\t\t\tskipped\n";
      continue;
    }
    out << format_number(p.reference) << "\t" << format_number(p.observed) << "\t" << format_number(p.std_error)
        << "\t" << format_number(p.z) << "\t" << (p.pass ? "pass" : "FAIL") << "\n";
    if (!p.pass) failed.push_back(i + 1);
  }
  out << "max |z| = " << format_number(rep.max_abs_z) << " (threshold " << format_number(threshold) << "): "
      << (rep.pass ? "PASS" : "FAIL") << "\n";
  if (!failed.empty()) {
    out << "failing rows:";
    for (std::size_t r : failed) out << " " << r;
    out << "\n";
  }
  return out.str();
}

}  // namespace rfm
