#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "abmuq/classify.hpp"
#include "abmuq/design.hpp"
#include "abmuq/hetgp.hpp"
#include "abmuq/simulator.hpp"

// Sequential design by integrated mean squared prediction error: each step
// either adds a fresh input or one more replicate at an existing input,
// whichever leaves the smallest IMSPE with hyperparameters held fixed.
namespace abmuq::seqdesign {

// Quadrature points for the IMSPE integral, uniformly weighted.
struct ReferenceSet {
  Eigen::MatrixXd points;
};

// `size` Halton points in [0,1]^p. With a classifier, points whose
// probability of producing an output is below 0.5 are dropped and the
// sequence is extended until at least `min_size` remain.
ReferenceSet make_reference_set(int p, const classify::ClassifierModel* classifier = nullptr,
                                int size = 512, int min_size = 100);

// Mean latent-mean variance over the reference points.
double imspe(const gp::GPModel& mean_gp, const ReferenceSet& reference);
double imspe(const hetgp::HetGPModel& model, const ReferenceSet& reference);

struct FreshPoint {
  Eigen::VectorXd x;
};
struct Replicate {
  Eigen::Index index;  // row of DesignState::rep_design
};
using Candidate = std::variant<FreshPoint, Replicate>;

enum class ChoiceKind { Fresh, Replicate };
std::string to_string(ChoiceKind kind);

struct IterationRecord {
  int iter = 0;
  ChoiceKind kind = ChoiceKind::Fresh;
  Eigen::VectorXd x;
  double imspe_before = 0.0;
  double imspe_after = 0.0;  // hypothetical value that won the selection
  int total_replicates = 0;  // runs at x after this iteration
  int candidates_evaluated = 0;
  bool produced_output = true;
};

struct DesignState {
  design::ReplicatedDesign rep_design;
  std::vector<RunRecord> all_runs;
  hetgp::HetGPModel model;
  std::vector<IterationRecord> history;
};

// State from an existing run log and a model fitted to it.
DesignState make_state(std::vector<RunRecord> runs, hetgp::HetGPModel model);

// Mean GP the model would have after adding `candidate`, hyperparameters
// fixed. A fresh point carries the predicted mean as pseudo-response and
// the predicted intrinsic variance as nugget; a replicate lowers the
// point's nugget from tau^2/a to tau^2/(a+1). Throws ConfigError for a
// fresh point outside [0,1]^p or an out-of-range replicate index.
gp::GPModel hypothetical_mean_gp(const hetgp::HetGPModel& model, const DesignState& state,
                                 const Candidate& candidate);

double hypothetical_imspe(const hetgp::HetGPModel& model, const DesignState& state,
                          const Candidate& candidate, const ReferenceSet& reference);

// IMSPE reduction achieved by `candidate` (>= 0 up to rounding).
double candidate_gain(const hetgp::HetGPModel& model, const DesignState& state,
                      const Candidate& candidate, const ReferenceSet& reference);

struct Choice {
  Candidate candidate;
  double imspe_before = 0.0;
  double imspe_after = 0.0;
  int candidates_evaluated = 0;
};

// Scores `n_candidates` LHD-sampled fresh points (classifier-approved when a
// classifier is given, exact duplicates of design points skipped) and every
// existing design point as a replicate; returns the lowest hypothetical
// IMSPE. Ties go to the lower index, fresh before replicate. Candidates are
// scored on `jobs` threads; the result does not depend on `jobs`.
Choice select_next(const hetgp::HetGPModel& model, const DesignState& state, int n_candidates, Rng& rng,
                   const ReferenceSet& reference, const classify::ClassifierModel* classifier = nullptr,
                   int jobs = 1);

struct SequentialOptions {
  int n_candidates = 100;
  int refit_every = 1;
  std::uint64_t run_seed_base = 0;
  hetgp::HetGPOptions fit{};
  const classify::ClassifierModel* classifier = nullptr;
  int jobs = 1;
};

// `budget` iterations of select / simulate / update. The model is refitted
// every `refit_every` iterations and reconditioned at fixed
// hyperparameters otherwise.
DesignState run_sequential(DesignState state, int budget, Rng& rng, const Simulator& simulator,
                           const ReferenceSet& reference, const SequentialOptions& options = {});

// Root mean squared error divided by the range of `truth`.
double nrmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

}  // namespace abmuq::seqdesign
