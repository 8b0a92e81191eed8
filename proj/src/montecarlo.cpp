#include "rfm/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/random/normal_distribution.hpp>

#include "rfm/errors.hpp"
#include "rfm/rng.hpp"

namespace rfm {
namespace {

Eigen::MatrixXd standard_normals(Eigen::Index rows, Eigen::Index cols, std::uint64_t stream) {
  Xoshiro256 gen(stream);
  boost::random::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(gen);
  }
  return m;
}

std::vector<std::size_t> layer_sizes(const ExperimentConfig& cfg) {
  std::vector<std::size_t> n{cfg.n0};
  n.insert(n.end(), cfg.hidden.begin(), cfg.hidden.end());
  return n;
}

std::vector<double> actual_alphas(const ExperimentConfig& cfg) {
  std::vector<double> alphas;
  for (std::size_t n : layer_sizes(cfg)) alphas.push_back(static_cast<double>(n) / static_cast<double>(cfg.p));
  return alphas;
}

Eigen::VectorXd density_teacher(const TargetModel& target, const std::vector<double>& eigenvalues) {
  const auto n0 = static_cast<Eigen::Index>(eigenvalues.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n0);
  for (const auto& atom : target.density()) {
    std::vector<Eigen::Index> hits;
    for (Eigen::Index i = 0; i < n0; ++i) {
      if (std::abs(eigenvalues[static_cast<std::size_t>(i)] - atom.value) <= 1e-9 * atom.value) hits.push_back(i);
    }
    if (hits.empty()) {
      if (atom.weight > 0.0) {
        throw InputError("teacher mass at eigenvalue " + std::to_string(atom.value) +
                         " has no matching eigenvalue at n0 = " + std::to_string(n0));
      }
      continue;
    }
    const double coeff = std::sqrt(static_cast<double>(n0) * atom.weight / static_cast<double>(hits.size()));
    for (Eigen::Index i : hits) w[i] = coeff;
  }
  return w;
}

// Square roots and sizes computed once per experiment.
struct Pipeline {
  RawConfig raw;
  std::size_t p = 0;
  std::vector<Covariance> sigma_roots;
  std::vector<Covariance> gamma_roots;
  bool fold_last_gamma = false;
  double rank_tol = 0.0;

  Pipeline(RawConfig finite, std::size_t samples, double tol)
      : raw(std::move(finite)), p(samples), rank_tol(tol) {
    for (const auto& s : raw.sigmas) sigma_roots.push_back(s.sqrt());
    for (const auto& g : raw.gammas) gamma_roots.push_back(g.sqrt());
    const Covariance& last = raw.gammas.back();
    fold_last_gamma = !(last.is_diagonal() && (last.diag().array() == 1.0).all());
  }

  Instance sample(std::uint64_t seed) const {
    Instance inst;
    const auto n0 = raw.sigmas.front().dim();
    const auto rows = static_cast<Eigen::Index>(p);
    inst.X = sigma_roots.front().right_multiply(standard_normals(rows, n0, stream_seed(seed, StreamRole::Data)));
    for (std::size_t l = 1; l < raw.sigmas.size(); ++l) {
      const Eigen::MatrixXd z = standard_normals(raw.sigmas[l - 1].dim(), raw.sigmas[l].dim(),
                                                 stream_seed(seed, StreamRole::Layer, l));
      inst.factors.push_back(gamma_roots[l - 1].left_multiply(sigma_roots[l].right_multiply(z)));
    }
    if (raw.teacher.size() == n0) {
      inst.teacher = raw.teacher;
    } else {
      inst.teacher = standard_normals(n0, 1, stream_seed(seed, StreamRole::Teacher));
    }
    if (raw.noise_var > 0.0) {
      inst.noise = std::sqrt(raw.noise_var) * standard_normals(rows, 1, stream_seed(seed, StreamRole::Noise));
    } else {
      inst.noise = Eigen::VectorXd::Zero(rows);
    }
    return inst;
  }

  double error(std::uint64_t seed) const {
    const Instance inst = sample(seed);
    const auto n0 = static_cast<double>(inst.X.cols());
    Eigen::MatrixXd F = build_features(inst.factors, static_cast<std::size_t>(inst.X.cols()));
    // Ridge penalty v^T Gamma^-1 v becomes |u|^2 under v = Gamma^{1/2} u.
    if (fold_last_gamma) F = gamma_roots.back().right_multiply(F);
    const Eigen::VectorXd y = inst.X * inst.teacher / std::sqrt(n0) + inst.noise;
    const Covariance& sigma0 = raw.sigmas.front();
    switch (raw.estimator.kind) {
      case Estimator::Kind::Ridge: {
        const Eigen::VectorXd v =
            fit_ridge(inst.X, F, y, raw.estimator.lambda, Covariance::identity(F.cols()));
        return empirical_error(v, F, inst.teacher, sigma0);
      }
      case Estimator::Kind::Ridgeless:
        return empirical_error(fit_minnorm(inst.X, F, y, rank_tol), F, inst.teacher, sigma0);
      case Estimator::Kind::Gibbs:
        return empirical_error(fit_minnorm(inst.X, F, y, rank_tol), F, inst.teacher, sigma0) +
               gibbs_thermal_trace(inst.X, F, sigma0);
    }
    return 0.0;
  }
};

double default_rank_tol(std::size_t p, std::size_t n_last) {
  return static_cast<double>(std::max(p, n_last)) * std::numeric_limits<double>::epsilon();
}

// sum_ij (S M)_ij M_ij = tr(M^T S M)
double weighted_frobenius(const Covariance& s, const Eigen::MatrixXd& m) {
  return s.left_multiply(m).cwiseProduct(m).sum();
}

std::string describe(const std::vector<std::pair<std::uint64_t, std::string>>& failures) {
  std::ostringstream msg;
  msg << failures.size() << " seed(s) failed:";
  for (const auto& [seed, what] : failures) msg << " [seed " << seed << ": " << what << "]";
  return msg.str();
}

}  // namespace

SeedFailureError::SeedFailureError(std::vector<std::pair<std::uint64_t, std::string>> failures)
    : std::runtime_error(describe(failures)), failures_(std::move(failures)) {}

void ExperimentConfig::validate() const {
  if (n0 == 0 || p == 0) throw InputError("experiment sizes n0 and p must be at least 1");
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    if (hidden[l] == 0) throw InputError("hidden size n_" + std::to_string(l + 1) + " must be at least 1");
  }
  if (seeds.empty()) throw InputError("experiment needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw InputError("experiment seeds must be distinct");
  }
  if (rank_tol && !(*rank_tol > 0.0)) throw InputError("rank_tol must be positive");
  if (estimator.kind == Estimator::Kind::Ridge && !(estimator.lambda > 0.0 && std::isfinite(estimator.lambda))) {
    throw InputError("ridge estimator needs lambda > 0");
  }
  const std::size_t depth = std::visit([](const auto& m) { return m.depth(); }, model);
  if (depth != hidden.size()) {
    throw InputError("model has " + std::to_string(depth) + " hidden layers but " +
                     std::to_string(hidden.size()) + " hidden sizes were given");
  }
}

Sizes sizes_from_alphas(std::size_t n0, const std::vector<double>& alphas) {
  if (alphas.empty()) throw InputError("need alpha_0 to derive sizes");
  Sizes s;
  s.n0 = n0;
  s.p = static_cast<std::size_t>(std::llround(static_cast<double>(n0) / alphas.front()));
  if (s.p == 0) throw InputError("alpha_0 too large: p rounds to 0");
  for (std::size_t l = 1; l < alphas.size(); ++l) {
    const auto n = static_cast<std::size_t>(std::llround(alphas[l] * static_cast<double>(s.p)));
    if (n == 0) throw InputError("alpha_" + std::to_string(l) + " too small: n rounds to 0");
    s.hidden.push_back(n);
  }
  return s;
}

RawConfig finite_raw_config(const ExperimentConfig& cfg) {
  const auto sizes = layer_sizes(cfg);
  RawConfig raw;
  if (const auto* given = std::get_if<RawConfig>(&cfg.model)) {
    raw = *given;
    raw.alphas = actual_alphas(cfg);
    raw.estimator = cfg.estimator;
    raw.validate();
    for (std::size_t l = 0; l < sizes.size(); ++l) {
      if (static_cast<std::size_t>(raw.sigmas[l].dim()) != sizes[l]) {
        throw InputError("Sigma_" + std::to_string(l) + " has dimension " + std::to_string(raw.sigmas[l].dim()) +
                         " but n_" + std::to_string(l) + " = " + std::to_string(sizes[l]));
      }
    }
    return raw;
  }
  const auto& model = std::get<ModelConfig>(cfg.model);
  model.validate();
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    const std::vector<double> eig = finite_spectrum(model.spectra[l], sizes[l]);
    raw.sigmas.push_back(Covariance::diagonal(Eigen::Map<const Eigen::VectorXd>(eig.data(), static_cast<Eigen::Index>(eig.size()))));
    raw.gammas.push_back(Covariance::identity(static_cast<Eigen::Index>(sizes[l])));
    if (l == 0 && model.target.kind() == TargetKind::WeightedDensity) raw.teacher = density_teacher(model.target, eig);
  }
  raw.alphas = actual_alphas(cfg);
  raw.noise_var = model.noise_var;
  raw.estimator = cfg.estimator;
  return raw;
}

Instance sample_instance(const RawConfig& raw, std::size_t p, std::uint64_t seed) {
  return Pipeline(raw, p, 0.0).sample(seed);
}

Instance sample_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return sample_instance(finite_raw_config(cfg), cfg.p, seed);
}

Eigen::MatrixXd build_features(const std::vector<Eigen::MatrixXd>& factors, std::size_t n0) {
  const auto rows = static_cast<Eigen::Index>(n0);
  if (factors.empty()) return Eigen::MatrixXd::Identity(rows, rows);
  if (factors.front().rows() != rows) throw InputError("first feature factor must have n0 rows");
  Eigen::MatrixXd F = factors.front();
  double widths = static_cast<double>(factors.front().cols());
  for (std::size_t l = 1; l < factors.size(); ++l) {
    if (factors[l].rows() != F.cols()) {
      throw InputError("feature factor " + std::to_string(l + 1) + " has " + std::to_string(factors[l].rows()) +
                       " rows, expected " + std::to_string(F.cols()));
    }
    F = F * factors[l];
    widths *= static_cast<double>(factors[l].cols());
  }
  F /= std::sqrt(widths);
  return F;
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                          double lambda, const Covariance& gamma) {
  if (!(lambda > 0.0)) throw InputError("fit_ridge needs lambda > 0");
  if (gamma.dim() != F.cols()) throw InputError("Gamma_{L+1} must match the number of features");
  const double n0 = static_cast<double>(X.cols());
  const Eigen::MatrixXd G = X * F;
  Eigen::MatrixXd system = G.transpose() * G / n0;
  if (gamma.is_diagonal()) {
    system.diagonal() += lambda * gamma.diag().cwiseInverse();
  } else {
    const Eigen::MatrixXd dense = gamma.to_dense();
    system += lambda * dense.llt().solve(Eigen::MatrixXd::Identity(dense.rows(), dense.cols()));
  }
  const Eigen::VectorXd rhs = G.transpose() * y / std::sqrt(n0);
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("ridge system is numerically singular at lambda = " + std::to_string(lambda) +
                         "; use fit_minnorm for the ridgeless limit");
  }
  Eigen::VectorXd v = llt.solve(rhs);
  const double scale = rhs.norm();
  if (scale > 0.0 && (system * v - rhs).norm() > 1e-8 * scale) {
    throw NumericalError("ridge normal equations not satisfied at lambda = " + std::to_string(lambda) +
                         "; use fit_minnorm for the ridgeless limit");
  }
  return v;
}

Eigen::VectorXd fit_minnorm(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                            double rank_tol) {
  const double n0 = static_cast<double>(X.cols());
  const Eigen::MatrixXd A = X * F / std::sqrt(n0);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rank_tol > 0.0 ? rank_tol
                                   : default_rank_tol(static_cast<std::size_t>(A.rows()),
                                                      static_cast<std::size_t>(A.cols())));
  return svd.solve(y);
}

double empirical_error(const Eigen::VectorXd& v, const Eigen::MatrixXd& F, const Eigen::VectorXd& teacher,
                       const Covariance& sigma0) {
  if (F.cols() != v.size() || F.rows() != teacher.size() || sigma0.dim() != teacher.size()) {
    throw InputError("empirical_error: inconsistent dimensions");
  }
  const Eigen::VectorXd diff = F * v - teacher;
  return sigma0.quadratic_form(diff) / static_cast<double>(teacher.size());
}

double gibbs_thermal_trace(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, const Covariance& sigma0) {
  const Eigen::Index p = X.rows();
  const Eigen::Index n0 = X.cols();
  const Eigen::Index n_last = F.cols();
  if (F.rows() != n0 || sigma0.dim() != n0) throw InputError("gibbs_thermal_trace: inconsistent dimensions");
  if (p >= std::min(n0, n_last)) return 0.0;
  // A hidden bottleneck narrower than p also makes P cover the row space of F.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_qr(F);
  rank_qr.setThreshold(static_cast<double>(std::max(n0, n_last)) * std::numeric_limits<double>::epsilon());
  if (p >= rank_qr.rank()) return 0.0;

  const Eigen::MatrixXd Gt = (X * F).transpose();  // n_L x p
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Gt);
  const Eigen::VectorXd r_diag = qr.matrixQR().diagonal().cwiseAbs();
  if (r_diag.minCoeff() <= 1e-10 * r_diag.maxCoeff()) {
    throw NumericalError("feature kernel X F F^T X^T is singular at overparameterized sizes");
  }
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n_last, p);
  const Eigen::MatrixXd B = F * Q;
  const double trace = weighted_frobenius(sigma0, F) - weighted_frobenius(sigma0, B);
  return std::max(trace, 0.0) / static_cast<double>(n0);
}

double run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n_last = cfg.hidden.empty() ? cfg.n0 : cfg.hidden.back();
  return Pipeline(finite_raw_config(cfg), cfg.p, cfg.rank_tol.value_or(default_rank_tol(cfg.p, n_last)))
      .error(seed);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TheoryOptions& opts) {
  cfg.validate();
  const std::size_t n_last = cfg.hidden.empty() ? cfg.n0 : cfg.hidden.back();
  const Pipeline pipeline(finite_raw_config(cfg), cfg.p, cfg.rank_tol.value_or(default_rank_tol(cfg.p, n_last)));

  const std::size_t count = cfg.seeds.size();
  std::vector<double> errors(count, 0.0);
  std::vector<std::string> failure(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        errors[i] = pipeline.error(cfg.seeds[i]);
      } catch (const std::exception& e) {
        failure[i] = e.what();
        if (failure[i].empty()) failure[i] = "unknown failure";
      }
    }
  };
  std::size_t threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  threads = std::min(threads, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<std::pair<std::uint64_t, std::string>> failures;
  for (std::size_t i = 0; i < count; ++i) {
    if (!failure[i].empty()) failures.emplace_back(cfg.seeds[i], failure[i]);
  }
  if (!failures.empty()) throw SeedFailureError(std::move(failures));

  ExperimentResult res;
  res.seeds = cfg.seeds;
  res.per_seed_errors = errors;
  res.n0 = cfg.n0;
  res.hidden = cfg.hidden;
  res.p = cfg.p;
  double sum = 0.0;
  for (double e : errors) sum += e;
  res.mean = sum / static_cast<double>(count);
  res.single_seed = count == 1;
  if (count > 1) {
    double ss = 0.0;
    for (double e : errors) ss += (e - res.mean) * (e - res.mean);
    res.std_error = std::sqrt(ss / static_cast<double>(count - 1) / static_cast<double>(count));
  }

  if (cfg.attach_theory) {
    try {
      RawConfig raw = pipeline.raw;
      const bool averaged = raw.teacher.size() == 0;
      if (averaged) raw.teacher = Eigen::VectorXd::Ones(raw.sigmas.front().dim());
      ModelConfig theory_cfg = transform(raw);
      if (averaged) theory_cfg.target = TargetModel::isotropic_average();
      res.theory = evaluate(theory_cfg, opts);
    } catch (const DomainError& e) {
      res.theory_note = e.what();
    } catch (const ConvergenceError& e) {
      res.theory_note = e.what();
    }
  }
  return res;
}

}  // namespace rfm
