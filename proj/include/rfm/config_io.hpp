#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rfm/errors.hpp"
#include "rfm/model.hpp"
#include "rfm/selfconsistent.hpp"

namespace rfm {

inline constexpr int kSchemaVersion = 1;

/// Bad configuration file. `where` is "line L, column C" for syntax errors
/// or a field path such as "model.spectra[1].exponent".
class ConfigError : public InputError {
 public:
  ConfigError(std::string where, const std::string& what)
      : InputError(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct SweepAxis {
  std::string name;
  std::vector<double> grid;
  bool operator==(const SweepAxis&) const = default;
};

/// Axis names accepted by sweeps: alpha0_inverse, alpha_hidden,
/// alpha1_over_alpha0, lambda, eta, noise_var, alpha<k>, omega<k>.
bool is_known_axis(const std::string& name);

/// Quantities a sweep can emit besides the regime column.
/// "theory", "power_law", "large_width", "simulation".
bool is_known_output(const std::string& name);

struct SweepSpec {
  std::vector<SweepAxis> axes;  // at most two; the first varies slowest
  std::vector<std::string> outputs{"theory"};
  bool wants(const std::string& output) const;
  bool operator==(const SweepSpec&) const = default;
};

struct SimulationSpec {
  std::size_t n0 = 0;  // 0: no simulation configured
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 1;
  std::optional<double> rank_tol;
  bool operator==(const SimulationSpec&) const = default;
};

using Problem = std::variant<ModelConfig, RawConfig>;

struct RunConfig {
  Problem problem;
  SweepSpec sweep;
  SimulationSpec simulation;
  SolverSettings solver;
  double regime_tol = kDefaultRegimeTol;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Seeds base, base + 1, ..., base + count - 1.
std::vector<std::uint64_t> consecutive_seeds(std::uint64_t base, std::size_t count);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

nlohmann::ordered_json to_json(const RunConfig& cfg);
nlohmann::ordered_json to_json(const ModelConfig& cfg);
nlohmann::ordered_json to_json(const RawConfig& cfg);
std::string dump_run_config(const RunConfig& cfg);

ModelConfig model_from_json(const nlohmann::json& j, const std::string& path = "model");
RawConfig raw_from_json(const nlohmann::json& j, const std::string& path = "raw");

}  // namespace rfm
