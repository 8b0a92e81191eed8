#include "rfm/config_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace rfm {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(at(path, key), "unknown field");
    }
  }
}

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ConfigError(at(path, key), "missing required field");
  return j.at(key);
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::uint64_t as_uint(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_doubles(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_double(j[i], at(path, i)));
  return out;
}

// Runs a constructor and reports InputError at `path`.
template <class F>
auto guarded(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(path, e.what());
  }
}

SpectralModel spectrum_from_json(const json& j, const std::string& path) {
  const std::string kind = as_string(require(j, path, "kind"), at(path, "kind"));
  if (kind == "isotropic") {
    check_keys(j, path, {"kind", "scale"});
    const double scale = j.contains("scale") ? as_double(j["scale"], at(path, "scale")) : 1.0;
    return guarded(path, [&] { return SpectralModel::isotropic(scale); });
  }
  if (kind == "discrete") {
    check_keys(j, path, {"kind", "atoms"});
    const json& atoms = require(j, path, "atoms");
    const std::string apath = at(path, "atoms");
    if (!atoms.is_array()) throw ConfigError(apath, "expected an array");
    std::vector<SpectralAtom> out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const std::string p = at(apath, i);
      check_keys(atoms[i], p, {"value", "weight"});
      out.push_back({as_double(require(atoms[i], p, "value"), at(p, "value")),
                     as_double(require(atoms[i], p, "weight"), at(p, "weight"))});
    }
    return guarded(path, [&] { return SpectralModel::discrete(std::move(out)); });
  }
  if (kind == "power_law") {
    check_keys(j, path, {"kind", "scale", "exponent", "resolution"});
    const double scale = j.contains("scale") ? as_double(j["scale"], at(path, "scale")) : 1.0;
    const double exponent = as_double(require(j, path, "exponent"), at(path, "exponent"));
    const std::size_t resolution = j.contains("resolution")
                                       ? as_uint(j["resolution"], at(path, "resolution"))
                                       : kDefaultPowerLawResolution;
    return guarded(path, [&] { return SpectralModel::power_law(scale, exponent, resolution); });
  }
  throw ConfigError(at(path, "kind"), "unknown spectrum kind '" + kind + "' (isotropic, discrete, power_law)");
}

ordered_json spectrum_to_json(const SpectralModel& s) {
  ordered_json j;
  switch (s.kind()) {
    case SpectrumKind::Isotropic:
      j["kind"] = "isotropic";
      j["scale"] = s.scale();
      break;
    case SpectrumKind::Discrete: {
      j["kind"] = "discrete";
      j["atoms"] = ordered_json::array();
      for (const auto& a : s.eigenvalues()) j["atoms"].push_back({{"value", a.value}, {"weight", a.weight}});
      break;
    }
    case SpectrumKind::PowerLaw:
      j["kind"] = "power_law";
      j["scale"] = s.scale();
      j["exponent"] = s.exponent();
      j["resolution"] = s.resolution();
      break;
  }
  return j;
}

TargetModel target_from_json(const json& j, const std::string& path) {
  const std::string kind = as_string(require(j, path, "kind"), at(path, "kind"));
  if (kind == "isotropic_average") {
    check_keys(j, path, {"kind"});
    return TargetModel::isotropic_average();
  }
  if (kind == "weighted_density") {
    check_keys(j, path, {"kind", "atoms"});
    const json& atoms = require(j, path, "atoms");
    const std::string apath = at(path, "atoms");
    if (!atoms.is_array()) throw ConfigError(apath, "expected an array");
    std::vector<SpectralAtom> out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const std::string p = at(apath, i);
      check_keys(atoms[i], p, {"value", "mass"});
      out.push_back({as_double(require(atoms[i], p, "value"), at(p, "value")),
                     as_double(require(atoms[i], p, "mass"), at(p, "mass"))});
    }
    return guarded(path, [&] { return TargetModel::weighted_density(std::move(out)); });
  }
  throw ConfigError(at(path, "kind"), "unknown target kind '" + kind + "' (isotropic_average, weighted_density)");
}

ordered_json target_to_json(const TargetModel& t) {
  ordered_json j;
  if (t.kind() == TargetKind::IsotropicAverage) {
    j["kind"] = "isotropic_average";
    return j;
  }
  j["kind"] = "weighted_density";
  j["atoms"] = ordered_json::array();
  for (const auto& a : t.density()) j["atoms"].push_back({{"value", a.value}, {"mass", a.weight}});
  return j;
}

Estimator estimator_from_json(const json& j, const std::string& path) {
  const std::string kind = as_string(require(j, path, "kind"), at(path, "kind"));
  if (kind == "ridgeless") {
    check_keys(j, path, {"kind"});
    return Estimator::ridgeless();
  }
  if (kind == "gibbs") {
    check_keys(j, path, {"kind"});
    return Estimator::gibbs();
  }
  if (kind == "ridge") {
    check_keys(j, path, {"kind", "lambda"});
    return Estimator::ridge(as_double(require(j, path, "lambda"), at(path, "lambda")));
  }
  throw ConfigError(at(path, "kind"), "unknown estimator '" + kind + "' (ridgeless, ridge, gibbs)");
}

ordered_json estimator_to_json(const Estimator& e) {
  ordered_json j;
  switch (e.kind) {
    case Estimator::Kind::Ridgeless: j["kind"] = "ridgeless"; break;
    case Estimator::Kind::Gibbs: j["kind"] = "gibbs"; break;
    case Estimator::Kind::Ridge:
      j["kind"] = "ridge";
      j["lambda"] = e.lambda;
      break;
  }
  return j;
}

Covariance covariance_from_json(const json& j, const std::string& path) {
  if (!j.is_object() || j.size() != 1) {
    throw ConfigError(path, "expected exactly one of {\"identity\": n}, {\"diagonal\": [...]}, {\"matrix\": [[...]]}");
  }
  if (j.contains("identity")) {
    const auto n = as_uint(j["identity"], at(path, "identity"));
    if (n == 0) throw ConfigError(at(path, "identity"), "dimension must be at least 1");
    return Covariance::identity(static_cast<Eigen::Index>(n));
  }
  if (j.contains("diagonal")) {
    const auto d = as_doubles(j["diagonal"], at(path, "diagonal"));
    return Covariance::diagonal(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
  }
  if (j.contains("matrix")) {
    const json& rows = j["matrix"];
    const std::string mpath = at(path, "matrix");
    if (!rows.is_array() || rows.empty()) throw ConfigError(mpath, "expected a non-empty array of rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = as_doubles(rows[static_cast<std::size_t>(i)], at(mpath, static_cast<std::size_t>(i)));
      if (static_cast<Eigen::Index>(row.size()) != n) {
        throw ConfigError(at(mpath, static_cast<std::size_t>(i)), "matrix must be square");
      }
      for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
    }
    return Covariance::dense(std::move(m));
  }
  throw ConfigError(path, "expected one of identity, diagonal, matrix");
}

ordered_json covariance_to_json(const Covariance& c) {
  ordered_json j;
  if (c.is_diagonal()) {
    j["diagonal"] = std::vector<double>(c.diag().data(), c.diag().data() + c.diag().size());
    return j;
  }
  const Eigen::MatrixXd m = c.to_dense();
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) row[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(row);
  }
  j["matrix"] = rows;
  return j;
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

const std::regex kIndexedAxis{R"((alpha|omega)(\d+))"};

}  // namespace

bool is_known_axis(const std::string& name) {
  static const std::set<std::string> fixed{"alpha0_inverse", "alpha_hidden", "alpha1_over_alpha0",
                                           "lambda",         "eta",          "noise_var"};
  return fixed.count(name) > 0 || std::regex_match(name, kIndexedAxis);
}

bool is_known_output(const std::string& name) {
  return name == "theory" || name == "power_law" || name == "large_width" || name == "simulation";
}

bool SweepSpec::wants(const std::string& output) const {
  return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
}

std::vector<std::uint64_t> consecutive_seeds(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

void RunConfig::validate() const {
  std::visit(
      [](const auto& p) {
        try {
          p.validate();
        } catch (const InputError& e) {
          throw ConfigError(std::is_same_v<std::decay_t<decltype(p)>, ModelConfig> ? "model" : "raw", e.what());
        }
      },
      problem);
  try {
    solver.validate();
  } catch (const InputError& e) {
    throw ConfigError("solver", e.what());
  }
  if (!(regime_tol > 0.0)) throw ConfigError("regime_tol", "must be positive");
  if (sweep.axes.size() > 2) throw ConfigError("sweep.axes", "at most two axes are supported");
  std::set<std::string> names;
  for (std::size_t a = 0; a < sweep.axes.size(); ++a) {
    const auto& axis = sweep.axes[a];
    const std::string path = "sweep.axes[" + std::to_string(a) + "]";
    if (!is_known_axis(axis.name)) throw ConfigError(path + ".name", "unknown axis '" + axis.name + "'");
    if (!names.insert(axis.name).second) throw ConfigError(path + ".name", "duplicate axis");
    if (axis.grid.empty()) throw ConfigError(path + ".grid", "grid must not be empty");
    bool up = true;
    bool down = true;
    for (std::size_t i = 0; i < axis.grid.size(); ++i) {
      if (!std::isfinite(axis.grid[i])) throw ConfigError(path + ".grid[" + std::to_string(i) + "]", "not finite");
      if (i > 0) {
        up = up && axis.grid[i] > axis.grid[i - 1];
        down = down && axis.grid[i] < axis.grid[i - 1];
      }
    }
    if (!up && !down) throw ConfigError(path + ".grid", "grid must be strictly monotone");
    if (std::holds_alternative<RawConfig>(problem) && axis.name != "eta" && axis.name != "noise_var" &&
        axis.name != "lambda") {
      throw ConfigError(path + ".name", "raw configurations only sweep eta, noise_var or lambda");
    }
  }
  for (std::size_t i = 0; i < sweep.outputs.size(); ++i) {
    if (!is_known_output(sweep.outputs[i])) {
      throw ConfigError("sweep.outputs[" + std::to_string(i) + "]", "unknown output '" + sweep.outputs[i] + "'");
    }
  }
  if (simulation.rank_tol && !(*simulation.rank_tol > 0.0)) throw ConfigError("simulation.rank_tol", "must be positive");
  if (std::set<std::uint64_t>(simulation.seeds.begin(), simulation.seeds.end()).size() != simulation.seeds.size()) {
    throw ConfigError("simulation.seeds", "seeds must be distinct");
  }
}

ModelConfig model_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"alphas", "spectra", "target", "noise_var", "eta", "estimator"});
  ModelConfig m;
  m.alphas = as_doubles(require(j, path, "alphas"), at(path, "alphas"));
  const json& spectra = require(j, path, "spectra");
  if (!spectra.is_array()) throw ConfigError(at(path, "spectra"), "expected an array");
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    m.spectra.push_back(spectrum_from_json(spectra[i], at(at(path, "spectra"), i)));
  }
  if (j.contains("target")) m.target = target_from_json(j["target"], at(path, "target"));
  if (j.contains("noise_var") && j.contains("eta")) throw ConfigError(path, "give noise_var or eta, not both");
  if (j.contains("noise_var")) m.noise_var = as_double(j["noise_var"], at(path, "noise_var"));
  if (j.contains("eta")) {
    const double eta = as_double(j["eta"], at(path, "eta"));
    m.noise_var = eta * eta;
  }
  if (j.contains("estimator")) m.estimator = estimator_from_json(j["estimator"], at(path, "estimator"));
  guarded(path, [&] {
    m.validate();
    return 0;
  });
  return m;
}

RawConfig raw_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"gammas", "sigmas", "teacher", "alphas", "noise_var", "eta", "estimator"});
  RawConfig r;
  for (const char* key : {"gammas", "sigmas"}) {
    const json& list = require(j, path, key);
    const std::string lpath = at(path, key);
    if (!list.is_array()) throw ConfigError(lpath, "expected an array");
    auto& dest = std::string(key) == "gammas" ? r.gammas : r.sigmas;
    for (std::size_t i = 0; i < list.size(); ++i) dest.push_back(covariance_from_json(list[i], at(lpath, i)));
  }
  const auto teacher = as_doubles(require(j, path, "teacher"), at(path, "teacher"));
  r.teacher = Eigen::Map<const Eigen::VectorXd>(teacher.data(), static_cast<Eigen::Index>(teacher.size()));
  r.alphas = as_doubles(require(j, path, "alphas"), at(path, "alphas"));
  if (j.contains("noise_var") && j.contains("eta")) throw ConfigError(path, "give noise_var or eta, not both");
  if (j.contains("noise_var")) r.noise_var = as_double(j["noise_var"], at(path, "noise_var"));
  if (j.contains("eta")) {
    const double eta = as_double(j["eta"], at(path, "eta"));
    r.noise_var = eta * eta;
  }
  if (j.contains("estimator")) r.estimator = estimator_from_json(j["estimator"], at(path, "estimator"));
  guarded(path, [&] {
    r.validate();
    return 0;
  });
  return r;
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(line_column(text, e.byte), std::string("JSON syntax error: ") + e.what());
  }
  check_keys(root, "config", {"schema_version", "model", "raw", "sweep", "simulation", "solver", "regime_tol"});
  const json& version = require(root, "config", "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }

  RunConfig cfg;
  if (root.contains("model") == root.contains("raw")) {
    throw ConfigError("config", "give exactly one of \"model\" or \"raw\"");
  }
  if (root.contains("model")) {
    cfg.problem = model_from_json(root["model"]);
  } else {
    cfg.problem = raw_from_json(root["raw"]);
  }

  if (root.contains("sweep")) {
    const json& s = root["sweep"];
    check_keys(s, "sweep", {"axes", "outputs"});
    if (s.contains("axes")) {
      const json& axes = s["axes"];
      if (!axes.is_array()) throw ConfigError("sweep.axes", "expected an array");
      for (std::size_t i = 0; i < axes.size(); ++i) {
        const std::string p = at(std::string("sweep.axes"), i);
        check_keys(axes[i], p, {"name", "grid"});
        cfg.sweep.axes.push_back({as_string(require(axes[i], p, "name"), at(p, "name")),
                                  as_doubles(require(axes[i], p, "grid"), at(p, "grid"))});
      }
    }
    if (s.contains("outputs")) {
      const json& outs = s["outputs"];
      if (!outs.is_array()) throw ConfigError("sweep.outputs", "expected an array of strings");
      cfg.sweep.outputs.clear();
      for (std::size_t i = 0; i < outs.size(); ++i) {
        cfg.sweep.outputs.push_back(as_string(outs[i], at(std::string("sweep.outputs"), i)));
      }
    }
  }

  if (root.contains("simulation")) {
    const json& s = root["simulation"];
    check_keys(s, "simulation", {"n0", "seeds", "base_seed", "threads", "rank_tol"});
    if (s.contains("n0")) cfg.simulation.n0 = as_uint(s["n0"], "simulation.n0");
    if (s.contains("threads")) cfg.simulation.threads = as_uint(s["threads"], "simulation.threads");
    if (s.contains("rank_tol")) cfg.simulation.rank_tol = as_double(s["rank_tol"], "simulation.rank_tol");
    if (s.contains("seeds")) {
      const json& seeds = s["seeds"];
      if (seeds.is_array()) {
        if (s.contains("base_seed")) throw ConfigError("simulation.base_seed", "only valid with a seed count");
        for (std::size_t i = 0; i < seeds.size(); ++i) {
          cfg.simulation.seeds.push_back(as_uint(seeds[i], at(std::string("simulation.seeds"), i)));
        }
      } else {
        const std::uint64_t base = s.contains("base_seed") ? as_uint(s["base_seed"], "simulation.base_seed") : 1;
        cfg.simulation.seeds = consecutive_seeds(base, as_uint(seeds, "simulation.seeds"));
      }
    }
  }

  if (root.contains("solver")) {
    const json& s = root["solver"];
    check_keys(s, "solver", {"rel_tol", "abs_tol", "max_iters", "bracket_growth"});
    if (s.contains("rel_tol")) cfg.solver.rel_tol = as_double(s["rel_tol"], "solver.rel_tol");
    if (s.contains("abs_tol")) cfg.solver.abs_tol = as_double(s["abs_tol"], "solver.abs_tol");
    if (s.contains("max_iters")) cfg.solver.max_iters = as_uint(s["max_iters"], "solver.max_iters");
    if (s.contains("bracket_growth")) cfg.solver.bracket_growth = as_double(s["bracket_growth"], "solver.bracket_growth");
  }
  if (root.contains("regime_tol")) cfg.regime_tol = as_double(root["regime_tol"], "regime_tol");
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

ordered_json to_json(const ModelConfig& m) {
  ordered_json j;
  j["alphas"] = m.alphas;
  j["spectra"] = ordered_json::array();
  for (const auto& s : m.spectra) j["spectra"].push_back(spectrum_to_json(s));
  j["target"] = target_to_json(m.target);
  j["noise_var"] = m.noise_var;
  j["estimator"] = estimator_to_json(m.estimator);
  return j;
}

ordered_json to_json(const RawConfig& r) {
  ordered_json j;
  j["gammas"] = ordered_json::array();
  for (const auto& g : r.gammas) j["gammas"].push_back(covariance_to_json(g));
  j["sigmas"] = ordered_json::array();
  for (const auto& s : r.sigmas) j["sigmas"].push_back(covariance_to_json(s));
  j["teacher"] = std::vector<double>(r.teacher.data(), r.teacher.data() + r.teacher.size());
  j["alphas"] = r.alphas;
  j["noise_var"] = r.noise_var;
  j["estimator"] = estimator_to_json(r.estimator);
  return j;
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  if (const auto* m = std::get_if<ModelConfig>(&cfg.problem)) {
    j["model"] = to_json(*m);
  } else {
    j["raw"] = to_json(std::get<RawConfig>(cfg.problem));
  }
  ordered_json sweep;
  sweep["axes"] = ordered_json::array();
  for (const auto& a : cfg.sweep.axes) sweep["axes"].push_back({{"name", a.name}, {"grid", a.grid}});
  sweep["outputs"] = cfg.sweep.outputs;
  j["sweep"] = sweep;
  ordered_json sim;
  sim["n0"] = cfg.simulation.n0;
  sim["seeds"] = cfg.simulation.seeds;
  sim["threads"] = cfg.simulation.threads;
  if (cfg.simulation.rank_tol) sim["rank_tol"] = *cfg.simulation.rank_tol;
  j["simulation"] = sim;
  j["solver"] = {{"rel_tol", cfg.solver.rel_tol},
                 {"abs_tol", cfg.solver.abs_tol},
                 {"max_iters", cfg.solver.max_iters},
                 {"bracket_growth", cfg.solver.bracket_growth}};
  j["regime_tol"] = cfg.regime_tol;
  return j;
}

std::string dump_run_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace rfm
