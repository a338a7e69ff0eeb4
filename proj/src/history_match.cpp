#include "abmuq/history_match.hpp"

#include <cmath>
#include <string>

#include "abmuq/errors.hpp"

namespace abmuq::hm {

void Observation::validate() const {
  if (!std::isfinite(z)) throw ConfigError("observation z must be finite");
  if (!(var_e >= 0.0) || !(var_d >= 0.0)) throw ConfigError("observation variances must be >= 0");
}

Eigen::VectorXd implausibility(const hetgp::HetGPModel& model, const Eigen::MatrixXd& X,
                               const Observation& obs, const ImplausibilityOptions& options) {
  const hetgp::HetPrediction p = hetgp::predict_hetgp(model, X);
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double denom = obs.var_e + obs.var_d + p.var_mean(i);
    if (options.include_intrinsic) denom += p.intrinsic_var(i);
    if (!(denom > 0.0)) throw NumericalError("implausibility: zero total variance");
    out(i) = std::abs(obs.z - p.mean(i)) / std::sqrt(denom);
  }
  return out;
}

double implausibility(const hetgp::HetGPModel& model, const Eigen::VectorXd& x, const Observation& obs,
                      const ImplausibilityOptions& options) {
  return implausibility(model, Eigen::MatrixXd(x.transpose()), obs, options)(0);
}

std::vector<char> passes_wave(const WaveEmulator& wave, const Eigen::MatrixXd& X, const NroyCriteria& criteria) {
  if (!(criteria.threshold >= 0.0)) throw ConfigError("implausibility threshold must be >= 0");
  const Eigen::VectorXd I = implausibility(wave.model, X, criteria.obs, criteria.implausibility);
  std::vector<char> ok(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) ok[static_cast<std::size_t>(i)] = I(i) <= criteria.threshold;
  if (wave.classifier) {
    const Eigen::VectorXd prob = classify::predict_prob(*wave.classifier, X);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (prob(i) < 0.5) ok[static_cast<std::size_t>(i)] = 0;
    }
  }
  return ok;
}

namespace {

std::vector<char> passes_all(std::span<const WaveEmulator> waves, const Eigen::MatrixXd& X,
                             const NroyCriteria& criteria) {
  std::vector<char> ok(static_cast<std::size_t>(X.rows()), 1);
  for (const auto& w : waves) {
    const auto pw = passes_wave(w, X, criteria);
    for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = ok[i] && pw[i];
  }
  return ok;
}

Eigen::MatrixXd select(const Eigen::MatrixXd& X, const std::vector<char>& keep) {
  Eigen::Index count = 0;
  for (char k : keep) count += k ? 1 : 0;
  Eigen::MatrixXd out(count, X.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (keep[static_cast<std::size_t>(i)]) out.row(r++) = X.row(i);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd nroy_filter(const WaveEmulator& current, std::span<const WaveEmulator> prior_waves,
                            const Eigen::MatrixXd& samples, const NroyCriteria& criteria) {
  std::vector<char> keep = passes_wave(current, samples, criteria);
  const auto prior = passes_all(prior_waves, samples, criteria);
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = keep[i] && prior[i];
  return select(samples, keep);
}

design::DesignMatrix sample_nroy(std::span<const WaveEmulator> waves, int n, Rng& rng,
                                 const NroyCriteria& criteria, const NroySampleOptions& options) {
  if (n < 1) throw ConfigError("sample_nroy needs n >= 1");
  if (waves.empty()) throw ConfigError("sample_nroy needs at least one wave");
  const Eigen::Index p = waves.front().model.mean_gp.dim();
  const int target = n * std::max(options.oversample, 1);
  std::vector<Eigen::VectorXd> pool;
  int attempts = 0;
  while (static_cast<int>(pool.size()) < target && attempts < options.attempt_cap) {
    const int batch = std::min(options.batch, options.attempt_cap - attempts);
    Eigen::MatrixXd cand(batch, p);
    for (Eigen::Index i = 0; i < cand.rows(); ++i) {
      for (Eigen::Index c = 0; c < p; ++c) cand(i, c) = uniform01(rng);
    }
    attempts += batch;
    const auto ok = passes_all(waves, cand, criteria);
    for (Eigen::Index i = 0; i < cand.rows() && static_cast<int>(pool.size()) < target; ++i) {
      if (ok[static_cast<std::size_t>(i)]) pool.push_back(cand.row(i).transpose());
    }
  }
  if (static_cast<int>(pool.size()) < n) {
    throw NumericalError("sample_nroy: only " + std::to_string(pool.size()) + " of " + std::to_string(n) +
                         " points accepted in " + std::to_string(attempts) +
                         " attempts (estimated NROY fraction " +
                         std::to_string(static_cast<double>(pool.size()) / std::max(attempts, 1)) + ")");
  }
  Eigen::MatrixXd all(static_cast<Eigen::Index>(pool.size()), p);
  for (std::size_t i = 0; i < pool.size(); ++i) all.row(static_cast<Eigen::Index>(i)) = pool[i].transpose();
  return design::maximin_subset(all, n);
}

Eigen::MatrixXd evaluation_grid(int res) {
  if (res < 1) throw ConfigError("grid resolution must be >= 1");
  Eigen::MatrixXd G(static_cast<Eigen::Index>(res) * res, 2);
  for (int j = 0; j < res; ++j) {
    for (int i = 0; i < res; ++i) {
      G(static_cast<Eigen::Index>(j) * res + i, 0) = (i + 0.5) / res;
      G(static_cast<Eigen::Index>(j) * res + i, 1) = (j + 0.5) / res;
    }
  }
  return G;
}

namespace {

bool has_both_classes(const classify::LabeledDesign& d) {
  bool pos = false;
  bool neg = false;
  for (int l : d.labels) (l > 0 ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

HistoryMatchResult run_waves_from_runs(std::vector<RunRecord> initial_runs, const Simulator& simulator,
                                       const WaveConfig& config, Rng& rng) {
  if (config.n_waves < 1) throw ConfigError("n_waves must be >= 1");
  config.criteria.obs.validate();
  if (initial_runs.empty()) throw ConfigError("history matching needs initial runs");
  const Eigen::Index p = initial_runs.front().x.size();
  if (p != 2) throw ConfigError("history matching evaluation grid is two-dimensional");

  HistoryMatchResult result;
  result.grid = evaluation_grid(config.grid_resolution);
  result.all_runs = std::move(initial_runs);
  std::vector<char> cumulative(static_cast<std::size_t>(result.grid.rows()), 1);
  std::vector<WaveEmulator> emulators;
  design::ReplicatedDesign wave_design = replicated_design_of(result.all_runs);

  for (int w = 1; w <= config.n_waves; ++w) {
    if (w > 1) {
      auto fresh = run_design(wave_design, simulator, config.run_seed_base, result.all_runs.size(), config.jobs);
      for (auto& r : fresh) result.all_runs.push_back(std::move(r));
    }

    WaveResult wave;
    wave.wave_index = w;
    wave.design = wave_design;
    const classify::LabeledDesign labels = existence_labels(result.all_runs);
    if (has_both_classes(labels)) {
      wave.emulator.classifier = classify::fit_classifier(labels, config.classifier, rng);
      wave.classifier_refit = true;
    }
    wave.emulator.model = hetgp::fit_hetgp(quantitative_summary(result.all_runs), config.fit, rng);
    emulators.push_back(wave.emulator);

    wave.grid_implausibility = implausibility(wave.emulator.model, result.grid, config.criteria.obs,
                                              config.criteria.implausibility);
    const auto pass = passes_wave(wave.emulator, result.grid, config.criteria);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < cumulative.size(); ++i) {
      cumulative[i] = cumulative[i] && pass[i];
      inside += cumulative[i] ? 1 : 0;
    }
    wave.grid_in_nroy = cumulative;
    wave.nroy_fraction = static_cast<double>(inside) / static_cast<double>(cumulative.size());

    try {
      if (wave.nroy_fraction <= 0.0) throw NumericalError("empty NROY on the evaluation grid");
      wave.nroy_samples = sample_nroy(emulators, config.nroy_sample_count, rng, config.criteria, config.sampling);
      wave.next_design.points = design::maximin_subset(
          wave.nroy_samples, std::min<int>(config.points_per_wave, static_cast<int>(wave.nroy_samples.rows())));
      wave.next_design.replicates.assign(static_cast<std::size_t>(wave.next_design.points.rows()),
                                         config.replicates);
    } catch (const NumericalError&) {
      result.waves.push_back(std::move(wave));
      result.terminated_early = true;
      return result;
    }
    wave_design = wave.next_design;
    result.waves.push_back(std::move(wave));
  }
  return result;
}

HistoryMatchResult run_waves(const design::ReplicatedDesign& initial, const Simulator& simulator,
                             const WaveConfig& config, Rng& rng) {
  auto runs = run_design(initial, simulator, config.run_seed_base, 0, config.jobs);
  return run_waves_from_runs(std::move(runs), simulator, config, rng);
}

bool in_final_nroy(const HistoryMatchResult& result, const Eigen::VectorXd& x, const NroyCriteria& criteria) {
  const Eigen::MatrixXd X = x.transpose();
  for (const auto& w : result.waves) {
    if (!passes_wave(w.emulator, X, criteria)[0]) return false;
  }
  return true;
}

}  // namespace abmuq::hm
