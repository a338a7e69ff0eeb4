#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "abmuq/random.hpp"

// Discrete-time wolf-sheep predation model on a toroidal grid. The scalar
// output of interest is the step at which the last wolf dies.
namespace abmuq::abm {

struct SimConfig {
  double sheep_repro = 0.04;  // per-step reproduction probability, [0,1]
  double wolf_repro = 0.05;   // per-step reproduction probability, [0,1]
  int init_sheep = 100;
  int init_wolves = 50;
  int wolf_gain_from_food = 20;
  int wolf_init_energy = 40;
  int grid_size = 51;
  int max_steps = 2000;  // censoring horizon
  int sheep_cap = 10000;

  // Throws ConfigError on any violated field constraint.
  void validate() const;
};

void to_json(nlohmann::json& j, const SimConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SimConfig& c);

struct Sheep {
  int x = 0;
  int y = 0;
};

struct Wolf {
  int x = 0;
  int y = 0;
  int energy = 0;
};

struct WorldState {
  int step = 0;
  std::vector<Sheep> sheep;
  std::vector<Wolf> wolves;
  Rng rng;

  // Full textual state including the generator, for replay comparison.
  std::string serialize() const;
};

WorldState initial_state(const SimConfig& config, std::uint64_t seed);

// Optional bookkeeping filled in by step(); energies are wolf totals.
struct StepTrace {
  long long energy_before = 0;
  long long energy_after_feeding = 0;
  int wolves_moved = 0;
  int meals = 0;
};

// One synchronous tick: move all agents, wolves feed, both species
// reproduce, starved wolves are removed. Within a phase agents are visited
// in stable storage order.
WorldState step(WorldState state, const SimConfig& config,
                StepTrace* trace = nullptr);

enum class OutcomeKind { Extinct, CensoredHorizon, CensoredCap };

std::string to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(const std::string& s);

struct SimOutcome {
  OutcomeKind kind = OutcomeKind::Extinct;
  int time = 0;  // extinction step, or the step at which the run stopped
  int final_sheep = 0;
  int final_wolves = 0;

  bool censored() const { return kind != OutcomeKind::Extinct; }
  bool operator==(const SimOutcome&) const = default;
};

SimOutcome run(const SimConfig& config, std::uint64_t seed);

// Seed used for replicate `index` of a batch started from `base_seed`.
std::uint64_t replicate_seed(std::uint64_t base_seed, int index);

// `r` independent runs; result order matches replicate index regardless of
// how many worker threads are used.
std::vector<SimOutcome> run_replicates(const SimConfig& config,
                                       std::uint64_t base_seed, int r,
                                       int jobs = 1);

}  // namespace abmuq::abm
