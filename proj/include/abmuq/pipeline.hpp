#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abmuq/abm.hpp"
#include "abmuq/design.hpp"
#include "abmuq/history_match.hpp"
#include "abmuq/simulator.hpp"

// File-based stages: each reads its inputs from, and writes its artifacts
// to, one output directory.
namespace abmuq::pipeline {

struct Range {
  double lo = 0.0;
  double hi = 0.2;
};

struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  abm::SimConfig sim{};
  // Unit coordinate x1 maps to sheep_repro, x2 to wolf_repro.
  std::array<Range, 2> input_ranges{};

  int design_points = 30;
  int design_replicates = 10;
  int maximin_restarts = 10;

  int sequential_budget = 20;
  int n_candidates = 100;
  int refit_every = 1;
  int reference_size = 512;

  hm::Observation observation{300.0, 100.0, 400.0};
  double threshold = 3.0;
  bool include_intrinsic = true;
  int n_waves = 3;
  int points_per_wave = 20;
  int wave_replicates = 5;
  int nroy_samples = 200;

  int grid_resolution = 200;

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
// Missing keys keep defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

// Simulator over the unit square backed by the ABM. Keeps every outcome it
// produced, keyed by seed, so run logs can be written with full detail.
class AbmSimulator {
 public:
  AbmSimulator(abm::SimConfig base, std::array<Range, 2> ranges);

  abm::SimConfig config_at(const Eigen::VectorXd& x) const;
  abm::SimOutcome run(const Eigen::VectorXd& x, std::uint64_t seed) const;
  Simulator as_simulator() const;

  void remember(std::uint64_t seed, const abm::SimOutcome& outcome) const;
  // Throws std::out_of_range for a seed never run or remembered.
  abm::SimOutcome outcome(std::uint64_t seed) const;

 private:
  abm::SimConfig base_;
  std::array<Range, 2> ranges_;
  mutable std::mutex mutex_;
  mutable std::map<std::uint64_t, abm::SimOutcome> log_;
};

// Output of an extinct run is its extinction time; censored runs have none.
std::optional<double> quantity_of(const abm::SimOutcome& o);

// design.csv: x1,x2,replicates.
void write_design(const std::filesystem::path& path, const design::ReplicatedDesign& d);
// `replicates` column optional (default 1). Rejects empty files, values
// outside [0,1] and non-positive counts.
design::ReplicatedDesign read_design(const std::filesystem::path& path);

// runs.csv: x1,x2,seed,outcome,time,final_sheep,final_wolves.
void write_runs(const std::filesystem::path& path, const std::vector<RunRecord>& runs, const AbmSimulator& sim);
// Also registers every outcome with `sim` when given.
std::vector<RunRecord> read_runs(const std::filesystem::path& path, const AbmSimulator* sim = nullptr);

struct StageContext {
  PipelineConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  int jobs = 1;
};

// Each stage returns the artifact file names it wrote, relative to `out`.
std::vector<std::string> stage_design(const StageContext& ctx);
std::vector<std::string> stage_simulate(const StageContext& ctx);
std::vector<std::string> stage_classify(const StageContext& ctx);
std::vector<std::string> stage_fit(const StageContext& ctx);
std::vector<std::string> stage_sequential(const StageContext& ctx);

struct HistoryMatchOutcome {
  std::vector<std::string> artifacts;
  bool empty_nroy = false;
};
HistoryMatchOutcome stage_history_match(const StageContext& ctx);

struct PipelineOutcome {
  std::vector<std::pair<std::string, std::string>> artifacts;  // (stage, file)
  bool empty_nroy = false;
};

// Runs every stage in order and writes manifest.json. On failure the
// manifest records the failing stage and the exception propagates.
PipelineOutcome run_pipeline(const StageContext& ctx);

std::string sha256_file(const std::filesystem::path& path);

// Command-line entry point; returns the process exit code.
int run_command(int argc, const char* const* argv);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitEmptyNroy = 4;

}  // namespace abmuq::pipeline
