#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "abmuq/classify.hpp"
#include "abmuq/design.hpp"
#include "abmuq/hetgp.hpp"
#include "abmuq/simulator.hpp"

namespace abmuq::hm {

struct Observation {
  double z = 0.0;
  double var_e = 0.0;  // observation error variance
  double var_d = 0.0;  // model discrepancy variance

  void validate() const;
};

struct ImplausibilityOptions {
  // Treat the observation as one stochastic realization: the emulator's
  // intrinsic variance joins the observation-error term.
  bool include_intrinsic = true;
};

// |z - m*(x)| / sqrt(var_e + var_d + var_mean(x) [+ tau^2(x)]). Throws
// NumericalError when the denominator is zero.
double implausibility(const hetgp::HetGPModel& model, const Eigen::VectorXd& x, const Observation& obs,
                      const ImplausibilityOptions& options = {});
Eigen::VectorXd implausibility(const hetgp::HetGPModel& model, const Eigen::MatrixXd& X,
                               const Observation& obs, const ImplausibilityOptions& options = {});

// Emulator for one wave. Without a classifier every input is taken to
// produce an output.
struct WaveEmulator {
  hetgp::HetGPModel model;
  std::optional<classify::ClassifierModel> classifier;
};

struct NroyCriteria {
  Observation obs;
  double threshold = 3.0;
  ImplausibilityOptions implausibility{};
};

// Per-row test for one wave: I(x) <= threshold and P(output) >= 0.5.
std::vector<char> passes_wave(const WaveEmulator& wave, const Eigen::MatrixXd& X, const NroyCriteria& criteria);

// Rows of `samples` passing the current wave and every prior wave.
Eigen::MatrixXd nroy_filter(const WaveEmulator& current, std::span<const WaveEmulator> prior_waves,
                            const Eigen::MatrixXd& samples, const NroyCriteria& criteria);

struct NroySampleOptions {
  int attempt_cap = 100000;
  int batch = 2000;
  int oversample = 4;  // pool size as a multiple of n before sub-selection
};

// Uniform rejection sampling from the space passing every wave in `waves`,
// then greedy maximin sub-selection of n points from the accepted pool.
// Throws NumericalError (reporting the acceptance rate) if fewer than n
// candidates are accepted within the attempt cap.
design::DesignMatrix sample_nroy(std::span<const WaveEmulator> waves, int n, Rng& rng,
                                 const NroyCriteria& criteria, const NroySampleOptions& options = {});

struct WaveResult {
  int wave_index = 0;  // 1-based
  WaveEmulator emulator;
  design::ReplicatedDesign design;  // inputs simulated in this wave
  Eigen::MatrixXd nroy_samples;
  double nroy_fraction = 0.0;  // on the shared evaluation grid, cumulative
  design::ReplicatedDesign next_design;
  Eigen::VectorXd grid_implausibility;  // this wave's model only
  std::vector<char> grid_in_nroy;       // cumulative over waves
  bool classifier_refit = false;
};

struct WaveConfig {
  int n_waves = 3;
  int points_per_wave = 20;
  int replicates = 5;
  int grid_resolution = 200;
  int nroy_sample_count = 200;
  NroyCriteria criteria{};
  hetgp::HetGPOptions fit{};
  classify::ClassifierFitOptions classifier{};
  NroySampleOptions sampling{};
  std::uint64_t run_seed_base = 0;
  int jobs = 1;
};

struct HistoryMatchResult {
  std::vector<WaveResult> waves;
  bool terminated_early = false;  // NROY became empty
  Eigen::MatrixXd grid;           // shared evaluation grid (cell centres)
  std::vector<RunRecord> all_runs;
};

// Cell-centre grid of res^2 points on [0,1]^2, x1 varying fastest.
Eigen::MatrixXd evaluation_grid(int res);

// Waves of simulate / fit / rule out / resample. The first wave trains on
// the runs of `initial`; later waves add runs of the previous wave's
// next_design. Each wave's emulator uses every run so far.
HistoryMatchResult run_waves(const design::ReplicatedDesign& initial, const Simulator& simulator,
                             const WaveConfig& config, Rng& rng);

// As run_waves, with the first wave trained on runs that already exist.
HistoryMatchResult run_waves_from_runs(std::vector<RunRecord> initial_runs, const Simulator& simulator,
                                       const WaveConfig& config, Rng& rng);

// True when x passes every wave of `result`.
bool in_final_nroy(const HistoryMatchResult& result, const Eigen::VectorXd& x, const NroyCriteria& criteria);

}  // namespace abmuq::hm
